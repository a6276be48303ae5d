//! Stage functions shared by the command-line runner and the acceptance suite.

use crate::aim::{
    audit_existence, build_phi_sequence, window_schedule, semidistance_sweep, aim_constants, AimConfig, LevelAudit, SemidistanceSweep,
    AimConstants,
};
use crate::basis::{build_or_load, ConstrainedBasis};
use crate::decay::{decay_study, DecayReport, EnergyLedger};
use crate::dynamics::{estimate_absorbing, random_direction, random_state_h, rng_for, sample_attractor, AbsorbingEstimates, GalerkinModel, LakeModel};
use crate::error::{Error, Result};
use crate::oracle::quadrature_trilinear_eigen;
use crate::report::{AuditReport, Condition};
use crate::scenario::ModelScenario;
use crate::state::{resolvent_bounds_audit, semigroup_bound_audit, SpectralState};
use crate::stats::{linear_fit, LinearFit};
use crate::velocity::{h1_seminorm_b, inner_b, stress_form, trilinear_b, VelocityField};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// A scenario with its basis and model.
pub struct Prepared {
    pub scenario: ModelScenario,
    pub basis: Arc<ConstrainedBasis<f64>>,
    pub model: Arc<LakeModel<f64>>,
}

pub fn prepare(s: &ModelScenario, cache: Option<&Path>) -> Result<Prepared> {
    let fields = s.fields::<f64>()?;
    let basis = Arc::new(build_or_load(&fields, cache)?);
    let model = Arc::new(LakeModel::new(basis.clone(), s.forcing.clone())?);
    Ok(Prepared { scenario: s.clone(), basis, model })
}

impl Prepared {
    pub fn absorbing(&self) -> Result<AbsorbingEstimates> {
        estimate_absorbing(self.model.as_ref(), &self.scenario.absorbing_options())
    }

    pub fn initial_state(&self, radius: f64) -> SpectralState<f64> {
        random_state_h(&self.basis.eigenvalues, radius, &mut rng_for(self.scenario.seed, 0x1))
    }

    pub fn constants(&self, est: &AbsorbingEstimates, n: usize) -> Result<AimConstants> {
        let f = &self.basis.fields;
        let aim = self.scenario.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
        aim_constants(
            &self.basis.eigenvalues,
            f.b_bar,
            f.nu_i,
            f.eta_bar,
            self.scenario.forcing.profile_norm_b(&self.basis),
            est,
            n,
            &aim.overrides,
        )
    }

    /// The recursion settings at cut `n`, with the window schedule when requested.
    pub fn aim_config(&self, est: &AbsorbingEstimates, c: &AimConstants) -> Result<(AimConfig, bool)> {
        let aim = self.scenario.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
        let (sched, ok) = window_schedule(c, aim.levels);
        let schedule = aim.paper_schedule.then_some(sched);
        let cfg = self.scenario.aim_config(c.n, Some(est.rho1), schedule)?;
        let window = (0..cfg.levels).map(|k| (k as f64 + 1.0) * cfg.tau(k)).fold(0.0, f64::max);
        Ok((cfg, ok && window <= c.window_max()))
    }

    pub fn attractor(&self, est: &AbsorbingEstimates) -> Result<Vec<SpectralState<f64>>> {
        let aim = self.scenario.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
        let it = &self.scenario.integrator;
        sample_attractor(self.model.as_ref(), est, aim.attractor_samples, it.spinup, aim.sample_spacing, it.dt, self.scenario.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceAudit {
    pub constants: AimConstants,
    pub config: AimConfig,
    /// Whether `χ ≤ (N+1)τ_N ≤ window_max` holds for the schedule used.
    pub window_ok: bool,
    pub levels: Vec<LevelAudit>,
    pub report: AuditReport,
}

/// Sup and Lipschitz audit of `Φ_1 … Φ_N` at the scenario's cut.
pub fn existence_audit(p: &Prepared, est: &AbsorbingEstimates) -> Result<ExistenceAudit> {
    let aim = p.scenario.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
    let c = p.constants(est, aim.n)?;
    let (cfg, window_ok) = p.aim_config(est, &c)?;
    let phis = build_phi_sequence(p.model.clone(), cfg.clone())?;
    let (report, levels) = audit_existence(&phis, &c, aim.audit_samples, est.rho1, p.scenario.seed)?;
    Ok(ExistenceAudit { constants: c, config: cfg, window_ok, levels, report })
}

/// Semidistances over the scenario's `n`-sweep.
pub fn approximation_sweep(p: &Prepared, est: &AbsorbingEstimates, samples: &[SpectralState<f64>]) -> Result<SemidistanceSweep> {
    let aim = p.scenario.aim.as_ref().ok_or_else(|| Error::config("aim", "section missing"))?;
    let ns = if aim.sweep.is_empty() { vec![aim.n] } else { aim.sweep.clone() };
    let mut configs = Vec::with_capacity(ns.len());
    for &n in &ns {
        let c = p.constants(est, n)?;
        configs.push((n, p.aim_config(est, &c)?.0, c.paper_target()));
    }
    let model: Arc<dyn GalerkinModel<f64>> = p.model.clone();
    let lookup = |n: usize| configs.iter().find(|c| c.0 == n).expect("configured n");
    semidistance_sweep(model, samples, &ns, |n| lookup(n).1.clone(), |n| Some(lookup(n).2))
}

pub struct DecayRun {
    pub factor: f64,
    pub report: DecayReport,
    pub ledger: EnergyLedger,
}

/// The decay study on every box of the ladder.
pub fn decay_ladder(s: &ModelScenario, cache: Option<&Path>) -> Result<Vec<DecayRun>> {
    let d = s.decay.as_ref().ok_or_else(|| Error::config("decay", "section missing"))?;
    let opts = s.decay_options()?;
    let mut out = Vec::with_capacity(d.box_ladder.len());
    for &factor in &d.box_ladder {
        let p = prepare(&s.scaled_box(factor)?, cache)?;
        let u0 = p.initial_state(s.integrator.initial_radius);
        let (report, ledger) = decay_study(&p.model, &u0, &opts)?;
        out.push(DecayRun { factor, report, ledger });
    }
    Ok(out)
}

/// Decay conditions of one run, with the small-data threshold when configured.
pub fn decay_audit(s: &ModelScenario, run: &DecayRun) -> AuditReport {
    let tol = s.decay.as_ref().map_or(1e-6, |d| d.tolerance);
    let mut r = run.report.audit(tol);
    if s.forcing.is_zero() {
        r.push(Condition::flag("energy monotone", run.report.energy_monotone));
    }
    if let Some(k) = s.decay.as_ref().and_then(|d| d.kappa) {
        r.push(Condition::le("small-data kappa", run.report.kappa, k));
    }
    r
}

fn random_fields(basis: &ConstrainedBasis<f64>, count: usize, seed: u64) -> Vec<(DVector<f64>, VelocityField<f64>)> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let c = random_direction(&basis.eigenvalues, 0.5, &mut rng_for(seed, 0x5eed + i as u64));
            let u = basis.velocity(&c);
            (c, u)
        })
        .collect()
}

/// `∫ b|u||∇v||v|`, the scale of the skew identity.
fn skew_scale(basis: &ConstrainedBasis<f64>, u: &VelocityField<f64>, v: &VelocityField<f64>) -> f64 {
    let f = &basis.fields;
    let g = v.gradient(f);
    let mut s = 0.0;
    for i in 0..f.grid.len() {
        let nu = (u.u[0][i].powi(2) + u.u[1][i].powi(2)).sqrt();
        let nv = (v.u[0][i].powi(2) + v.u[1][i].powi(2)).sqrt();
        let ng = (g[0][0][i].powi(2) + g[0][1][i].powi(2) + g[1][0][i].powi(2) + g[1][1][i].powi(2)).sqrt();
        s += f.b[i] * nu * ng * nv;
    }
    s * f.grid.cell_area()
}

/// Symmetry, skew and quadrature agreement on random constrained fields.
pub fn algebra_audit(basis: &ConstrainedBasis<f64>, count: usize, oracle_triples: usize, seed: u64) -> Result<AuditReport> {
    let f = &basis.fields;
    let fs = random_fields(basis, count, seed);
    let n = fs.len();
    let worst = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (&fs[i].1, &fs[(i + 1) % n].1);
            let (uu, vv) = (inner_b(f, u, u)?, inner_b(f, v, v)?);
            let sym_inner = (inner_b(f, u, v)? - inner_b(f, v, u)?).abs() / (uu * vv).sqrt();
            let (su, sv) = (stress_form(f, u, u)?, stress_form(f, v, v)?);
            let sym_stress = (stress_form(f, u, v)? - stress_form(f, v, u)?).abs() / (su * sv).sqrt();
            let skew = trilinear_b(f, u, v, v)?.abs() / skew_scale(basis, u, v);
            Ok([sym_inner, sym_stress, skew])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| worst(rows.iter().map(|r| r[k]).collect());
    let oracle: Vec<f64> = (0..oracle_triples.min(n))
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = (&fs[i], &fs[(i + 1) % n], &fs[(i + 2) % n]);
            let fast = trilinear_b(f, &a.1, &b.1, &c.1)?;
            let slow = quadrature_trilinear_eigen(basis, &a.0, &b.0, &c.0, 3)?;
            Ok((fast - slow).abs() / skew_scale(basis, &a.1, &b.1).max(skew_scale(basis, &a.1, &c.1)))
        })
        .collect::<Result<_>>()?;
    let mut r = AuditReport::new(format!("weighted algebra, {n} fields"));
    r.push(Condition::le("inner_b symmetry (relative)", col(0), 1e-12));
    r.push(Condition::le("stress_form symmetry (relative)", col(1), 1e-12));
    r.push(Condition::le("trilinear_b(u,v,v) (relative)", col(2), 1e-10));
    r.push(Condition::le("trilinear_b vs oversampled quadrature (relative)", worst(oracle), 1e-8));
    Ok(r)
}

/// Smallest `stress_form(u,u)/h1_seminorm_b(u)` against `b̄ν_i`.
pub fn coercivity_audit(basis: &ConstrainedBasis<f64>, count: usize, seed: u64) -> Result<AuditReport> {
    let f = &basis.fields;
    let fs = random_fields(basis, count, seed ^ 0xc0e);
    let q: Vec<f64> = fs.par_iter().map(|(_, u)| Ok(stress_form(f, u, u)? / h1_seminorm_b(f, u)?)).collect::<Result<_>>()?;
    let min = q.into_iter().fold(f64::INFINITY, f64::min);
    let mut r = AuditReport::new(format!("coercivity, {count} fields"));
    r.push(Condition::ge("min Rayleigh quotient", min, f.b_bar * f.nu_i - 1e-9));
    r.value("b_bar*nu_i", f.b_bar * f.nu_i);
    Ok(r)
}

/// Linear fit of `λ_n` against `n`.
pub fn eigenvalue_fit(basis: &ConstrainedBasis<f64>) -> LinearFit {
    let x: Vec<f64> = (1..=basis.dim()).map(|n| n as f64).collect();
    linear_fit(&x, basis.eigenvalues.as_slice())
}

/// Semigroup and resolvent bounds at every sampled `(n, t, τ)`.
pub fn operator_bounds_audit(basis: &ConstrainedBasis<f64>, ns: &[usize], factors: &[f64], taus: &[f64]) -> Result<AuditReport> {
    let mut r = AuditReport::new("operator bounds");
    for &n in ns.iter().filter(|&&n| n > 0 && n < basis.dim()) {
        r.extend(semigroup_bound_audit(basis, n, factors)?);
        for &tau in taus {
            r.extend(resolvent_bounds_audit(basis, n, tau)?);
        }
    }
    Ok(r)
}
