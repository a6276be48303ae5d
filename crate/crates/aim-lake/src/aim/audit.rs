use super::config::{AimConfig, AimConstants};
use super::evaluator::{backward_euler_sequence, build_phi_sequence, AimEvaluator};
use crate::dynamics::{random_direction, rng_for, GalerkinModel};
use crate::error::Result;
use crate::report::{AuditReport, Condition};
use crate::scalar::{lit, to_f64, Real};
use crate::state::SpectralState;
use crate::stats::{linear_fit, LinearFit};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Random low-mode coordinates with V-norm uniform in `[0, radius]`.
pub fn random_low<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, n: usize, radius: f64, rng: &mut impl Rng) -> DVector<T> {
    let mut d = random_direction(model.eigenvalues(), 0.5, rng);
    for k in n..d.len() {
        d[k] = T::zero();
    }
    let r = rng.gen_range(0.0..=1.0) * radius;
    let nv = to_f64(model.norm_v(&d));
    if nv == 0.0 {
        d
    } else {
        d * lit::<T>(r / nv)
    }
}

/// Random pairs for Lipschitz estimates: one third far apart, the rest close.
fn sample_pairs<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, n: usize, radius: f64, count: usize, seed: u64) -> Vec<(DVector<T>, DVector<T>)> {
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, 1000 + i as u64);
            let a = random_low(model, n, radius, &mut rng);
            let b = if i % 3 == 0 {
                random_low(model, n, radius, &mut rng)
            } else {
                let scale = if i % 3 == 1 { 1e-2 } else { 1e-4 };
                &a + random_low(model, n, scale * radius.max(1e-12), &mut rng)
            };
            (a, b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub level: usize,
    pub sup_norm: f64,
    pub lipschitz: f64,
    pub window: f64,
}

/// Measured sup and Lipschitz constants of `Φ_1 … Φ_N` against `L0` and `l`,
/// plus the hypotheses of the existence statement.
pub fn audit_existence<T: Real>(
    phis: &[AimEvaluator<T>],
    c: &AimConstants,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<(AuditReport, Vec<LevelAudit>)> {
    let mut r = AuditReport::new(format!("existence audit (n = {})", c.n));
    let Some(top) = phis.last() else { return Ok((r, Vec::new())) };
    let model = top.model().clone();
    let cfg = top.config().clone();
    let n = cfg.n;
    let pts: Vec<DVector<T>> = (0..samples).map(|i| random_low(model.as_ref(), n, radius, &mut rng_for(seed, i as u64))).collect();
    let pairs = sample_pairs(model.as_ref(), n, radius, samples, seed);
    let mut levels = Vec::new();
    for phi in phis.iter().skip(1) {
        let sups: Vec<f64> = pts.par_iter().map(|y| phi.eval(y).map(|z| to_f64(model.norm_v(&z)))).collect::<Result<_>>()?;
        let lips: Vec<f64> = pairs
            .par_iter()
            .map(|(a, b)| {
                let num = to_f64(model.norm_v(&(phi.eval(a)? - phi.eval(b)?)));
                let den = to_f64(model.norm_v(&(a - b)));
                Ok(if den > 0.0 { num / den } else { 0.0 })
            })
            .collect::<Result<_>>()?;
        let sup = sups.iter().cloned().fold(0.0, f64::max);
        let lip = lips.iter().cloned().fold(0.0, f64::max);
        let steps = phi.level - 1;
        let window = (steps as f64 + 1.0) * cfg.tau(steps);
        let lv = phi.level;
        r.push(Condition::le(format!("sup |Phi_{lv}|_V <= L0"), sup, c.big_l0));
        r.push(Condition::le(format!("Lip(Phi_{lv}) <= l"), lip, c.l));
        r.push(Condition::le(format!("Lip(Phi_{lv}) <= l (sup over n)"), lip, c.l_sup).info());
        r.push(Condition::le(format!("window (N+1)tau at level {lv}"), window, c.window_max()).with_note("hypothesis").info());
        levels.push(LevelAudit { level: lv, sup_norm: sup, lipschitz: lip, window });
    }
    r.push(Condition::le("Xi <= l", c.xi, c.l).with_note("hypothesis: contraction factor").info());
    r.push(Condition::ge("lambda_n >= delta2", c.lambda_n, c.delta2).with_note("hypothesis").info());
    r.push(Condition::le("mu <= 1/2", c.mu, 0.5).with_note("hypothesis").info());
    for (k, v) in [
        ("L0", c.big_l0),
        ("l", c.l),
        ("l_sup", c.l_sup),
        ("Xi", c.xi),
        ("mu", c.mu),
        ("delta1", c.delta1),
        ("delta2", c.delta2),
        ("delta3", c.delta3),
        ("chi", c.chi),
        ("gamma", c.gamma),
        ("M0", c.m0),
        ("M1", c.m1),
    ] {
        r.value(k, v);
    }
    Ok((r, levels))
}

/// `exp{kτ[λ_n + (b̄ν_i/λ_n)^{-1/2} X (1+l)]}` with `X = M1 + Πη̄`.
pub fn backward_growth_bound(c: &AimConstants, tau: f64, k: usize) -> f64 {
    let rate = c.lambda_n + (c.b_bar * c.nu_i / c.lambda_n).powf(-0.5) * c.lip_x() * (1.0 + c.l);
    (k as f64 * tau * rate).exp()
}

/// Separation of backward Euler sequences against the exponential growth bound.
pub fn backward_growth_audit<T: Real>(phi: &AimEvaluator<T>, c: &AimConstants, pairs: usize, radius: f64, seed: u64) -> Result<AuditReport> {
    let model = phi.model().clone();
    let cfg = phi.config().clone();
    let steps = phi.level;
    let tau = cfg.tau(steps);
    let mut r = AuditReport::new(format!("backward growth, level {}", phi.level));
    let mut worst = 0.0f64;
    for (a, b) in sample_pairs(model.as_ref(), cfg.n, radius, pairs, seed ^ 0xb4c) {
        let (ya, _) = backward_euler_sequence(phi, &a, tau, steps)?;
        let (yb, _) = backward_euler_sequence(phi, &b, tau, steps)?;
        let d0 = to_f64(model.norm_v(&(&ya[0] - &yb[0])));
        if d0 == 0.0 {
            continue;
        }
        for k in 0..=steps {
            let dk = to_f64(model.norm_v(&(&ya[k] - &yb[k])));
            worst = worst.max(dk / (d0 * backward_growth_bound(c, tau, k)));
        }
    }
    r.push(Condition::le("separation / growth bound", worst, 1.0 + 1e-9));
    Ok(r)
}

/// Distances of attractor samples to the graphs of `Φ_0 … Φ_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemidistanceReport {
    pub n: usize,
    pub lambda_n1: f64,
    /// `ϱ_N` for `N = 0, 1, …`; `ϱ_0` is the flat baseline.
    pub rho: Vec<f64>,
    pub rho_flat: f64,
    pub paper_target: Option<f64>,
}

impl SemidistanceReport {
    pub fn best(&self) -> f64 {
        self.rho.iter().skip(1).cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn top(&self) -> f64 {
        *self.rho.last().unwrap_or(&self.rho_flat)
    }

    /// Every level is within `slack` of the flat baseline.
    pub fn dominance(&self, slack: f64) -> bool {
        self.rho.iter().all(|&r| r <= self.rho_flat * (1.0 + slack))
    }
}

/// `ϱ_N = sup_u ‖Φ_N(P_n u) − Q_n u‖_V` over the given samples.
pub fn semidistance_study<T: Real>(phis: &[AimEvaluator<T>], samples: &[SpectralState<T>], target: Option<f64>) -> Result<SemidistanceReport> {
    let model = phis[0].model().clone();
    let n = phis[0].config().n;
    let split = |u: &DVector<T>| {
        let mut y = u.clone();
        let mut z = u.clone();
        for k in 0..u.len() {
            if k < n {
                z[k] = T::zero();
            } else {
                y[k] = T::zero();
            }
        }
        (y, z)
    };
    let mut rho = Vec::with_capacity(phis.len());
    for phi in phis {
        let d: Vec<f64> = samples
            .par_iter()
            .map(|s| {
                let (y, z) = split(&s.coeffs);
                Ok(to_f64(model.norm_v(&(phi.eval(&y)? - z))))
            })
            .collect::<Result<_>>()?;
        rho.push(d.into_iter().fold(0.0, f64::max));
    }
    Ok(SemidistanceReport { n, lambda_n1: to_f64(model.eigenvalues()[n]), rho_flat: rho[0], rho, paper_target: target })
}

/// An n-sweep of [`semidistance_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemidistanceSweep {
    pub reports: Vec<SemidistanceReport>,
    /// `log ϱ_N` at the top level against `λ_{n+1}`.
    pub fit: Option<LinearFit>,
}

impl SemidistanceSweep {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lambda_n1,level,rho_N,rho_flat,paper_target\n");
        for r in &self.reports {
            for (lv, v) in r.rho.iter().enumerate() {
                let t = r.paper_target.map(|t| format!("{t:.10e}")).unwrap_or_default();
                s.push_str(&format!("{},{:.10e},{},{:.10e},{:.10e},{}\n", r.n, r.lambda_n1, lv, v, r.rho_flat, t));
            }
        }
        s
    }

    pub fn dominance(&self, slack: f64) -> bool {
        self.reports.iter().all(|r| r.dominance(slack))
    }
}

/// Runs the study for every `n`, building `Φ` from `config(n)` and `target(n)`.
pub fn semidistance_sweep<T: Real>(
    model: Arc<dyn GalerkinModel<T>>,
    samples: &[SpectralState<T>],
    ns: &[usize],
    config: impl Fn(usize) -> AimConfig,
    target: impl Fn(usize) -> Option<f64>,
) -> Result<SemidistanceSweep> {
    let mut reports = Vec::with_capacity(ns.len());
    for &n in ns {
        let phis = build_phi_sequence(model.clone(), config(n))?;
        reports.push(semidistance_study(&phis, samples, target(n))?);
    }
    let pts: Vec<(f64, f64)> = reports.iter().filter(|r| r.top() > 0.0).map(|r| (r.lambda_n1, r.top().ln())).collect();
    let fit = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y)
    });
    Ok(SemidistanceSweep { reports, fit })
}
