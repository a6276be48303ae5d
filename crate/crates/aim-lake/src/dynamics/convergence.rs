use super::integrate::{advance, integrate, IntegrateOptions};
use super::model::GalerkinModel;
use crate::error::Result;
use crate::scalar::{norm2, to_f64, Real};
use crate::state::SpectralState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergence {
    pub dt: f64,
    pub horizon: f64,
    /// `|u_h − u_{h/2}|` and `|u_{h/2} − u_{h/4}|` at the horizon.
    pub errors: [f64; 2],
    pub ratio: f64,
}

/// Step-halving study at a fixed horizon; the ratio tends to 4 for a second-order scheme.
pub fn self_convergence<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, u0: &SpectralState<T>, dt: f64, horizon: f64) -> Result<SelfConvergence> {
    let run = |h: f64| advance(model, u0, h, (horizon / h).round() as usize, None);
    let (a, b, c) = (run(dt)?, run(dt / 2.0)?, run(dt / 4.0)?);
    let e1 = to_f64(norm2(&(&a.coeffs - &b.coeffs)));
    let e2 = to_f64(norm2(&(&b.coeffs - &c.coeffs)));
    Ok(SelfConvergence { dt, horizon, errors: [e1, e2], ratio: e1 / e2 })
}

/// `‖u(T)‖_b² − ‖u(0)‖_b² + 2∫(stress_form(u,u) + ∫bη|u|² − (u,f)_b)`, relative to `‖u(0)‖_b²`.
///
/// Time integrals use the trapezoid rule on every step.
pub fn energy_law_residual<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, u0: &SpectralState<T>, dt: f64, horizon: f64) -> Result<f64> {
    let rec = integrate(model, u0, &IntegrateOptions::new(dt, horizon), None)?;
    let l = &rec.ledger;
    let rate = |i: usize| l[i].dissipation + l[i].friction - l[i].work;
    let mut integral = 0.0;
    for i in 1..l.len() {
        integral += 0.5 * (l[i].time - l[i - 1].time) * (rate(i) + rate(i - 1));
    }
    let e0 = l[0].norm_h * l[0].norm_h;
    let e1 = l[l.len() - 1].norm_h * l[l.len() - 1].norm_h;
    Ok((e1 - e0 + 2.0 * integral) / e0)
}

/// Richardson extrapolation of `r(h)` and `r(h/2)` for an error of order `p`.
pub fn richardson(r_h: f64, r_half: f64, p: i32) -> f64 {
    let k = 2f64.powi(p);
    (k * r_half - r_h) / (k - 1.0)
}
