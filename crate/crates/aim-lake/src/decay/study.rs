use super::ledger::{build_energy_ledger, cumulative_trapezoid, generalized_energy_residual, identity_limit_gap, strong_energy_residual};
use super::ledger::{EnergyLedger, Mollifier, ResidualSummary, ZProfile};
use super::split::splitting_schedule;
use crate::basis::ConstrainedBasis;
use crate::dynamics::{integrate, IntegrateOptions, LakeModel};
use crate::error::Result;
use crate::report::{AuditReport, Condition};
use crate::state::SpectralState;
use crate::stats::{linear_fit, LinearFit};
use crate::velocity::{l2_squared, lq_power, VelocityField};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayModel {
    PowerLaw,
    LogLaw,
    Exponential,
}

/// An envelope `‖u(t)‖₂ ≤ C·shape(t)` with `C` calibrated on an early window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub constant: f64,
    /// Exponent of the shape (`−1/2` for the log law).
    pub exponent: f64,
    /// Fit of `log‖u‖₂` against `log shape` over the whole run.
    pub fit: LinearFit,
    pub calibration_end: f64,
    pub envelope_violations: usize,
}

fn shape(model: DecayModel, exponent: f64, t: f64) -> f64 {
    match model {
        DecayModel::LogLaw => (E + t).ln().powf(exponent),
        DecayModel::PowerLaw => (1.0 + t).powf(exponent),
        DecayModel::Exponential => (exponent * t).exp(),
    }
}

/// Calibrates `C` on `t ≤ calibration_end` and counts violations over all samples.
pub fn fit_envelope(times: &[f64], norms: &[f64], model: DecayModel, exponent: f64, calibration_end: f64) -> DecayFit {
    let constant = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t <= calibration_end)
        .map(|(&t, &n)| n / shape(model, exponent, t))
        .fold(0.0, f64::max);
    let envelope_violations = times
        .iter()
        .zip(norms)
        .filter(|(&t, &n)| n > constant * shape(model, exponent, t) * (1.0 + 1e-12))
        .count();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(_, n)| **n > 0.0)
        .map(|(&t, &n)| (shape(model, 1.0, t).ln(), n.ln()))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    DecayFit { model, constant, exponent, fit: linear_fit(&x, &y), calibration_end, envelope_violations }
}

/// Fourier bound `|û(ξ,t)| ≤ ‖u₀‖₁ + C|ξ|t + C(1+|ξ|)(∫‖u‖₂ + ∫‖u‖₂²)` with one `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierBoundAudit {
    pub constant: f64,
    pub calibration_end: f64,
    pub points: usize,
    pub violations: usize,
}

pub fn fourier_bound_audit(led: &EnergyLedger, grid: &crate::grid::Grid, calibration_end: f64) -> Option<FourierBoundAudit> {
    let hats = led.hat_abs.as_ref()?;
    let norms: Vec<f64> = led.l2.iter().map(|v| v.sqrt()).collect();
    let i1 = cumulative_trapezoid(&led.times, &norms);
    let i2 = cumulative_trapezoid(&led.times, &led.l2);
    let u01 = led.l1[0];
    let m = grid.m();
    let k0 = grid.k0();
    let xi: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (a, b) = (grid.freq(i % m) as f64 * k0, grid.freq(i / m) as f64 * k0);
            (a * a + b * b).sqrt()
        })
        .collect();
    let denom = |j: usize, i: usize| xi[i] * led.times[j] + (1.0 + xi[i]) * (i1[j] + i2[j]);
    let mut c = 0.0f64;
    for (j, h) in hats.iter().enumerate() {
        if led.times[j] > calibration_end {
            continue;
        }
        for (i, &a) in h.iter().enumerate() {
            let d = denom(j, i);
            if d > 0.0 {
                c = c.max((a as f64 - u01) / d);
            }
        }
    }
    let mut violations = 0;
    let mut points = 0;
    for (j, h) in hats.iter().enumerate() {
        for (i, &a) in h.iter().enumerate() {
            points += 1;
            let rhs = u01 + c * denom(j, i);
            // |û| is stored in single precision.
            if a as f64 > rhs * (1.0 + 1e-6) {
                violations += 1;
            }
        }
    }
    Some(FourierBoundAudit { constant: c, calibration_end, points, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    /// `α` of the splitting weight `Z = (1+t)^α`.
    pub alpha: f64,
    pub mollifiers: Vec<Mollifier>,
    /// Fraction of the horizon used to calibrate envelope constants.
    pub calibration_fraction: f64,
    pub fourier_audit: bool,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            dt: 0.01,
            horizon: 50.0,
            record_every: 10,
            alpha: 2.0,
            mollifiers: vec![Mollifier::Identity, Mollifier::Gaussian, Mollifier::parse("heat").unwrap(), Mollifier::DiracApprox { n: 4.0 }],
            calibration_fraction: 0.25,
            fourier_audit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub time: f64,
    pub e_total: f64,
    pub e_low: f64,
    pub e_high: f64,
    pub dissipation: f64,
    pub work: f64,
    pub z: f64,
    pub g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedRow {
    pub mollifier: String,
    pub z: String,
    pub residual: ResidualSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub side_length: f64,
    pub strong: ResidualSummary,
    pub generalized: Vec<GeneralizedRow>,
    pub identity_gap: f64,
    pub max_triangle_excess: f64,
    pub max_plancherel_gap: f64,
    pub max_schedule_residual: f64,
    pub log_law: DecayFit,
    pub fourier_bound: Option<FourierBoundAudit>,
    /// `p` in `∫₀ᵗ‖u‖₂⁴ ≤ C(e+t)^p`, fitted on the second half.
    pub quartic_exponent: f64,
    pub quartic_monotone: bool,
    /// Whether `‖u‖_b²` never increased (meaningful when unforced).
    pub energy_monotone: bool,
    /// `sup_t b_s^{1/2}‖u(t)‖₂`.
    pub kappa: f64,
    pub final_norm: f64,
    pub split: Vec<SplitRow>,
}

impl DecayReport {
    pub fn split_csv(&self) -> String {
        let mut s = String::from("time,E_total,E_low,E_high,dissipation,work,Z,G2\n");
        for r in &self.split {
            s.push_str(&format!(
                "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                r.time, r.e_total, r.e_low, r.e_high, r.dissipation, r.work, r.z, r.g2
            ));
        }
        s
    }

    /// Conditions with tolerances relative to the initial energy.
    pub fn audit(&self, tol: f64) -> AuditReport {
        let mut r = AuditReport::new(format!("decay, L = {:.4}", self.side_length));
        r.push(Condition::ge("strong energy residual / E0", self.strong.min_relative, -tol));
        for g in &self.generalized {
            r.push(Condition::ge(format!("generalized residual / E0 ({}, Z = {})", g.mollifier, g.z), g.residual.min_relative, -tol));
        }
        r.push(Condition::le("identity-mollifier gap", self.identity_gap, 1e-8));
        r.push(Condition::le("triangle excess", self.max_triangle_excess, 1e-10));
        r.push(Condition::le("Plancherel gap", self.max_plancherel_gap, 1e-10));
        r.push(Condition::le("Z' - 2 b_s Z G^2", self.max_schedule_residual, 1e-12));
        r.push(Condition::le("log-law envelope violations", self.log_law.envelope_violations as f64, 0.0));
        if let Some(f) = &self.fourier_bound {
            r.push(Condition::le("Fourier bound violations", f.violations as f64, 0.0));
            r.value("fourier_bound_C", f.constant);
        }
        r.push(Condition::flag("quartic integral nondecreasing", self.quartic_monotone));
        r.value("log_law_C", self.log_law.constant);
        r.value("quartic_exponent", self.quartic_exponent);
        r.value("kappa", self.kappa);
        r
    }
}

/// Integrates from `u0` and audits the decay machinery on the trajectory.
pub fn decay_study(model: &LakeModel<f64>, u0: &SpectralState<f64>, opts: &DecayOptions) -> Result<(DecayReport, EnergyLedger)> {
    let rec = integrate(model, u0, &IntegrateOptions::new(opts.dt, opts.horizon).every(opts.record_every), None)?;
    let led = build_energy_ledger(model, &rec, &opts.mollifiers, opts.fourier_audit)?;
    let report = decay_report(model, &led, opts)?;
    Ok((report, led))
}

pub fn decay_report(model: &LakeModel<f64>, led: &EnergyLedger, opts: &DecayOptions) -> Result<DecayReport> {
    let grid = model.basis.fields.grid;
    let sched = splitting_schedule(opts.alpha, led.b_s);
    let mut generalized = Vec::new();
    for (k, m) in led.mollifiers.iter().enumerate() {
        for z in [ZProfile::One, ZProfile::Power(opts.alpha)] {
            let zs = match z {
                ZProfile::One => "1".to_string(),
                ZProfile::Power(a) => format!("(1+t)^{a}"),
            };
            generalized.push(GeneralizedRow { mollifier: m.label(), z: zs, residual: generalized_energy_residual(led, k, z)? });
        }
    }
    let identity_gap = led.mollifiers.iter().position(|m| *m == Mollifier::Identity).map(|k| identity_limit_gap(led, k)).unwrap_or(f64::NAN);
    let norms: Vec<f64> = led.l2.iter().map(|v| v.sqrt()).collect();
    let cal = opts.calibration_fraction * opts.horizon;
    let log_law = fit_envelope(&led.times, &norms, DecayModel::LogLaw, -0.5, cal);
    let quartic = cumulative_trapezoid(&led.times, &led.l2.iter().map(|v| v * v).collect::<Vec<_>>());
    let quartic_monotone = quartic.windows(2).all(|w| w[1] >= w[0]);
    let half = opts.horizon / 2.0;
    let (x, y): (Vec<f64>, Vec<f64>) = led
        .times
        .iter()
        .zip(&quartic)
        .filter(|(t, q)| **t >= half && **q > 0.0)
        .map(|(&t, &q)| ((E + t).ln(), q.ln()))
        .unzip();
    let quartic_exponent = if x.len() >= 2 { linear_fit(&x, &y).slope } else { f64::NAN };
    let split: Vec<SplitRow> = (0..led.times.len())
        .map(|i| {
            let t = led.times[i];
            SplitRow {
                time: t,
                e_total: led.split[i].total,
                e_low: led.split[i].low,
                e_high: led.split[i].high,
                dissipation: led.grad2[i],
                work: led.work[i],
                z: sched.z(t),
                g2: sched.g2(t),
            }
        })
        .collect();
    Ok(DecayReport {
        side_length: grid.side_length,
        strong: strong_energy_residual(led),
        generalized,
        identity_gap,
        max_triangle_excess: led.split.iter().map(|s| s.triangle_excess() / s.total.max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max),
        max_plancherel_gap: led.plancherel.iter().cloned().fold(0.0, f64::max),
        max_schedule_residual: led.times.iter().map(|&t| sched.ode_residual(t).abs()).fold(0.0, f64::max),
        log_law,
        fourier_bound: fourier_bound_audit(led, &grid, cal),
        quartic_exponent,
        quartic_monotone,
        energy_monotone: led.energy_b.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
        kappa: led.b_s.sqrt() * norms.iter().cloned().fold(0.0, f64::max),
        final_norm: *norms.last().unwrap_or(&0.0),
        split,
    })
}

/// `S(t) = e^{−(A+E)t}` in eigencoordinates.
pub struct LinearSemigroup {
    vals: DVector<f64>,
    vecs: DMatrix<f64>,
}

impl LinearSemigroup {
    pub fn new(model: &LakeModel<f64>) -> Self {
        let m = DMatrix::from_diagonal(&model.basis.eigenvalues) + model.friction_matrix();
        let e = nalgebra::SymmetricEigen::new((&m + m.transpose()) * 0.5);
        LinearSemigroup { vals: e.eigenvalues, vecs: e.eigenvectors }
    }

    pub fn apply(&self, c: &DVector<f64>, t: f64) -> DVector<f64> {
        let w = self.vecs.tr_mul(c).component_mul(&self.vals.map(|l| (-l * t).exp()));
        &self.vecs * w
    }
}

/// Smallest `C` with `‖S(t)u₀‖₂ ≤ C t^{−(1/q−1/2)}(‖u₀‖₂ + ‖u₀‖_q)` over the samples,
/// per decade of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpLqAudit {
    pub q: f64,
    pub times: Vec<f64>,
    /// Worst ratio at each time.
    pub ratios: Vec<f64>,
    pub constant: f64,
}

pub fn lp_lq_audit(model: &LakeModel<f64>, q: f64, t_samples: &[f64], initial: &[DVector<f64>]) -> LpLqAudit {
    let basis: &ConstrainedBasis<f64> = &model.basis;
    let s = LinearSemigroup::new(model);
    let pre: Vec<(DVector<f64>, f64)> = initial
        .iter()
        .map(|c| {
            let u: VelocityField<f64> = basis.velocity(c);
            (c.clone(), l2_squared(&u).sqrt() + lq_power(&u, q).powf(1.0 / q))
        })
        .collect();
    let ratios: Vec<f64> = t_samples
        .iter()
        .map(|&t| {
            pre.iter()
                .map(|(c, n0)| {
                    let out = l2_squared(&basis.velocity(&s.apply(c, t))).sqrt();
                    out / (t.powf(-(1.0 / q - 0.5)) * n0)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    LpLqAudit { q, times: t_samples.to_vec(), constant: ratios.iter().cloned().fold(0.0, f64::max), ratios }
}

/// Eigencoordinates of a narrow Gaussian bump, projected onto the space.
pub fn concentrated_state(basis: &ConstrainedBasis<f64>, width: f64) -> DVector<f64> {
    let g = basis.fields.grid;
    let l = g.side_length;
    let u = VelocityField::<f64>::from_fn(&g, |x, y| {
        let (dx, dy) = (x - 0.5 * l, y - 0.5 * l);
        let v = (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
        [v, 0.5 * v]
    });
    basis.project_field(&u.u)
}

pub fn residual_ok(r: &ResidualSummary, tol: f64) -> bool {
    r.min_relative >= -tol
}
