use super::integrate::{advance, integrate, IntegrateOptions, TrajectoryRecord};
use super::model::{advection_theta, GalerkinModel, PreparedNonlinearity};
use crate::error::{Error, Result};
use crate::report::{AuditReport, Condition};
use crate::scalar::{lit, norm2, to_f64, Real};
use crate::state::SpectralState;
use crate::stats::{max, percentile};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Deterministic per-task generator.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Gaussian coefficients with spectrum `c_k ~ N(0,1) λ_k^{-power}`.
pub fn random_direction<T: Real>(lam: &DVector<T>, power: f64, rng: &mut impl Rng) -> DVector<T> {
    DVector::from_iterator(
        lam.len(),
        lam.iter().map(|&l| {
            let z: f64 = rng.sample(StandardNormal);
            lit::<T>(z * to_f64(l).powf(-power))
        }),
    )
}

/// Random coefficients rescaled to the given H-norm.
pub fn random_state_h<T: Real>(lam: &DVector<T>, radius: f64, rng: &mut impl Rng) -> SpectralState<T> {
    let d = random_direction(lam, 0.5, rng);
    let n = to_f64(norm2(&d));
    SpectralState::new(d * lit::<T>(radius / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingOptions {
    pub ensemble_size: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Initial data have H-norm in `[R/2, R]`.
    pub init_radius: f64,
    /// Radii are `(1+margin)` times the late-window suprema.
    pub margin: f64,
    /// Spacing of recorded states used for time derivatives.
    pub sample_spacing: f64,
    /// Random states (and pairs) used for `M0`, `M1`.
    pub cutoff_samples: usize,
    pub seed: u64,
}

impl Default for AbsorbingOptions {
    fn default() -> Self {
        AbsorbingOptions {
            ensemble_size: 6,
            horizon: 60.0,
            dt: 0.01,
            init_radius: 1.0,
            margin: 0.1,
            sample_spacing: 0.05,
            cutoff_samples: 1000,
            seed: 7,
        }
    }
}

/// Empirical radii and constants of the absorbing set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingEstimates {
    pub rho0: f64,
    pub rho1: f64,
    pub t0: f64,
    pub m0: f64,
    pub m0_p99: f64,
    pub m1: f64,
    pub m1_p99: f64,
    /// Sup of the V-norm of `d²u/dt²`.
    pub beta1: f64,
    /// Sup of the V-norm of `du/dt`.
    pub beta2: f64,
    /// Largest `α` compatible with the measured `β1`, `β2`.
    pub alpha: f64,
    pub empirical: bool,
}

impl AbsorbingEstimates {
    /// `β1 ≤ 8ρ1/α²` and `β2 ≤ 2ρ1/α`.
    pub fn derivative_audit(&self) -> AuditReport {
        let mut r = AuditReport::new("time-derivative bounds (fitted alpha)");
        let (b1, b2) = if self.alpha.is_finite() {
            (8.0 * self.rho1 / (self.alpha * self.alpha), 2.0 * self.rho1 / self.alpha)
        } else {
            (0.0, 0.0)
        };
        r.push(Condition::le("beta1 <= 8 rho1/alpha^2", self.beta1, b1 * (1.0 + 1e-12)).with_note("alpha is fitted"));
        r.push(Condition::le("beta2 <= 2 rho1/alpha", self.beta2, b2 * (1.0 + 1e-12)).with_note("alpha is fitted"));
        r.value("alpha", self.alpha);
        r
    }
}

/// Measured `M0 = sup|B_θu|_b` and `M1 = sup|B_θu − B_θv|_b/‖u−v‖_V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConstants {
    pub m0: f64,
    pub m0_p99: f64,
    pub m1: f64,
    pub m1_p99: f64,
}

/// Samples the `√2ρ₁` V-ball (where `B_θ` can be nonzero) plus `extra` states.
pub fn cutoff_constants<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    rho1: f64,
    samples: usize,
    seed: u64,
    extra: &[SpectralState<T>],
) -> CutoffConstants {
    let prep = PreparedNonlinearity::new(rho1);
    let lam = model.eigenvalues();
    let draw = |rng: &mut ChaCha8Rng| -> DVector<T> {
        let d = random_direction(lam, 1.0, rng);
        let r = rng.gen_range(0.0..2f64.sqrt()) * rho1;
        let n = to_f64(model.norm_v(&d));
        d * lit::<T>(r / n)
    };
    let mut points: Vec<DVector<T>> = (0..samples)
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            draw(&mut rng)
        })
        .collect();
    points.extend(extra.iter().map(|s| s.coeffs.clone()));
    let m0s: Vec<f64> = points.par_iter().map(|c| to_f64(norm2(&advection_theta(model, c, Some(&prep))))).collect();
    let m1s: Vec<f64> = (0..samples.max(extra.len()))
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed ^ 0x5eed, i as u64);
            let u = if i < extra.len() && i % 2 == 0 { extra[i].coeffs.clone() } else { draw(&mut rng) };
            let v = match i % 3 {
                0 => draw(&mut rng),
                k => {
                    let e = random_direction(lam, 1.0, &mut rng);
                    let scale = if k == 1 { 1e-1 } else { 1e-3 } * rho1 / to_f64(model.norm_v(&e));
                    &u + e * lit::<T>(scale)
                }
            };
            let num = to_f64(norm2(&(advection_theta(model, &u, Some(&prep)) - advection_theta(model, &v, Some(&prep)))));
            let den = to_f64(model.norm_v(&(&u - &v)));
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();
    CutoffConstants { m0: max(&m0s).max(0.0), m0_p99: percentile(&m0s, 99.0), m1: max(&m1s).max(0.0), m1_p99: percentile(&m1s, 99.0) }
}

/// Ensemble estimate of the absorbing radii and derivative bounds.
pub fn estimate_absorbing<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, opts: &AbsorbingOptions) -> Result<AbsorbingEstimates> {
    let every = ((opts.sample_spacing / opts.dt).round() as usize).max(1);
    let iopts = IntegrateOptions::new(opts.dt, opts.horizon).every(every);
    let lam = model.eigenvalues();
    let runs: Vec<Result<TrajectoryRecord<T>>> = (0..opts.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(opts.seed, i as u64);
            let r = opts.init_radius * rng.gen_range(0.5..=1.0);
            let u0 = random_state_h(lam, r, &mut rng);
            integrate(model, &u0, &iopts, None)
        })
        .collect();
    let runs: Vec<TrajectoryRecord<T>> = runs.into_iter().collect::<Result<_>>()?;

    let late = 0.5 * opts.horizon;
    let (mut sup_h, mut sup_v) = (0.0f64, 0.0f64);
    for rec in &runs {
        let q = |a: f64, b: f64| {
            rec.ledger.iter().filter(|r| r.time >= a * opts.horizon && r.time <= b * opts.horizon).map(|r| r.norm_h).fold(0.0, f64::max)
        };
        let (q3, q4) = (q(0.5, 0.75), q(0.75, 1.0));
        if q4 > 2.0 * q3 + 1e-12 {
            return Err(Error::NoAbsorption {
                horizon: opts.horizon,
                detail: format!("H-norm sup grew from {q3:.3e} to {q4:.3e} over the last quarter"),
            });
        }
        for r in rec.ledger.iter().filter(|r| r.time >= late) {
            sup_h = sup_h.max(r.norm_h);
            sup_v = sup_v.max(r.norm_v);
        }
    }
    let rho0 = (1.0 + opts.margin) * sup_h;
    let rho1 = (1.0 + opts.margin) * sup_v;
    let mut t0 = 0.0f64;
    for rec in &runs {
        if let Some(i) = rec.ledger.iter().rposition(|r| r.norm_h > rho0 || r.norm_v > rho1) {
            t0 = t0.max(rec.times[(i + 1).min(rec.len() - 1)]);
        }
    }

    let dtr = lit::<T>(every as f64 * opts.dt);
    let (mut beta1, mut beta2) = (0.0f64, 0.0f64);
    let mut extra = Vec::new();
    for rec in &runs {
        for i in 1..rec.len().saturating_sub(1) {
            if rec.times[i - 1] < late || rec.times[i + 1] - rec.times[i] < 0.5 * to_f64(dtr) {
                continue;
            }
            let (a, b, c) = (&rec.states[i - 1].coeffs, &rec.states[i].coeffs, &rec.states[i + 1].coeffs);
            let d1 = (c - a) / (lit::<T>(2.0) * dtr);
            let d2 = (c - b * lit::<T>(2.0) + a) / (dtr * dtr);
            beta2 = beta2.max(to_f64(model.norm_v(&d1)));
            beta1 = beta1.max(to_f64(model.norm_v(&d2)));
            if i % 20 == 0 {
                extra.push(rec.states[i].clone());
            }
        }
    }
    let alpha = match (beta1 > 0.0, beta2 > 0.0) {
        (false, false) => f64::INFINITY,
        (true, false) => (8.0 * rho1 / beta1).sqrt(),
        (false, true) => 2.0 * rho1 / beta2,
        (true, true) => (2.0 * rho1 / beta2).min((8.0 * rho1 / beta1).sqrt()),
    };
    let cc = if rho1 > 0.0 {
        cutoff_constants(model, rho1, opts.cutoff_samples, opts.seed ^ 0xc0ff, &extra)
    } else {
        CutoffConstants { m0: 0.0, m0_p99: 0.0, m1: 0.0, m1_p99: 0.0 }
    };
    Ok(AbsorbingEstimates {
        rho0,
        rho1,
        t0,
        m0: cc.m0,
        m0_p99: cc.m0_p99,
        m1: cc.m1,
        m1_p99: cc.m1_p99,
        beta1,
        beta2,
        alpha,
        empirical: true,
    })
}

/// States along one trajectory after `max(spinup, t0)`, `spacing` apart.
pub fn sample_attractor<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    est: &AbsorbingEstimates,
    n_samples: usize,
    spinup: f64,
    spacing: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<SpectralState<T>>> {
    let mut rng = rng_for(seed, 0xa77);
    let mut u = random_state_h(model.eigenvalues(), est.rho0.max(1e-3) * 0.5, &mut rng);
    let spin = spinup.max(est.t0);
    u = advance(model, &u, dt, (spin / dt).round() as usize, None)?;
    let per = ((spacing / dt).round() as usize).max(1);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        out.push(u.clone());
        u = advance(model, &u, dt, per, None)?;
    }
    Ok(out)
}
