use super::model::{advection_theta, GalerkinModel, PreparedNonlinearity};
use crate::error::{Error, Result};
use crate::scalar::{lit, norm2, to_f64, Real};
use crate::state::SpectralState;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// `−B_θ(c) − Ec + f(t)`.
fn explicit_part<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    c: &DVector<T>,
    t: f64,
    prep: Option<&PreparedNonlinearity>,
) -> DVector<T> {
    model.forcing(t) - advection_theta(model, c, prep) - model.friction(c)
}

fn decay<T: Real>(lam: &DVector<T>, c: &DVector<T>, h: T) -> DVector<T> {
    DVector::from_iterator(c.len(), c.iter().zip(lam.iter()).map(|(&x, &l)| x * (-l * h).exp()))
}

/// One integrating-factor Heun step; `A` is exact, the rest is explicit RK2.
pub fn step<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    u: &SpectralState<T>,
    dt: f64,
    prep: Option<&PreparedNonlinearity>,
) -> Result<SpectralState<T>> {
    let out = raw_step(model, u, dt, prep);
    let limit = 1e6 * to_f64(u.norm_h()).max(1.0);
    check(&out, limit)?;
    Ok(out)
}

fn raw_step<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    u: &SpectralState<T>,
    dt: f64,
    prep: Option<&PreparedNonlinearity>,
) -> SpectralState<T> {
    let h = lit::<T>(dt);
    let half = lit::<T>(0.5 * dt);
    let lam = model.eigenvalues();
    let k1 = explicit_part(model, &u.coeffs, u.time, prep);
    let star = decay(lam, &(&u.coeffs + &k1 * h), h);
    let k2 = explicit_part(model, &star, u.time + dt, prep);
    let next = decay(lam, &(&u.coeffs + &k1 * half), h) + k2 * half;
    SpectralState { coeffs: next, time: u.time + dt }
}

fn check<T: Real>(s: &SpectralState<T>, limit: f64) -> Result<()> {
    let n = to_f64(s.norm_h());
    if !n.is_finite() || n > limit {
        return Err(Error::BlowUp { time: s.time, norm: n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    pub norm_h: f64,
    pub norm_v: f64,
    /// `stress_form(u,u)`.
    pub dissipation: f64,
    /// `(u, f)_b`.
    pub work: f64,
    /// `∫ bη|u|²`.
    pub friction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord<T: Real> {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState<T>>,
    pub ledger: Vec<LedgerRow>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn push<M: GalerkinModel<T> + ?Sized>(&mut self, model: &M, s: SpectralState<T>) {
        self.ledger.push(ledger_row(model, &s));
        self.times.push(s.time);
        self.states.push(s);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&SpectralState<T>> {
        self.states.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,normH,normV,dissipation,work\n");
        for r in &self.ledger {
            s.push_str(&format!("{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n", r.time, r.norm_h, r.norm_v, r.dissipation, r.work));
        }
        s
    }
}

pub fn ledger_row<T: Real, M: GalerkinModel<T> + ?Sized>(model: &M, s: &SpectralState<T>) -> LedgerRow {
    let c = &s.coeffs;
    let nv = to_f64(model.norm_v(c));
    LedgerRow {
        time: s.time,
        norm_h: to_f64(norm2(c)),
        norm_v: nv,
        dissipation: nv * nv,
        work: to_f64(c.dot(&model.forcing(s.time))),
        friction: to_f64(c.dot(&model.friction(c))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every `record_every`-th state (the endpoints are always kept).
    pub record_every: usize,
}

impl IntegrateOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        IntegrateOptions { dt, horizon, record_every: 1 }
    }

    pub fn every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Integrates from `u0` for `horizon`, recording the ledger along the way.
pub fn integrate<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    u0: &SpectralState<T>,
    opts: &IntegrateOptions,
    prep: Option<&PreparedNonlinearity>,
) -> Result<TrajectoryRecord<T>> {
    if !(opts.dt > 0.0) {
        return Err(Error::config("integrator.dt", "must be positive"));
    }
    let limit = 1e6 * to_f64(u0.norm_h()).max(1.0);
    let steps = opts.steps();
    let mut rec = TrajectoryRecord::default();
    rec.push(model, u0.clone());
    let mut u = u0.clone();
    for i in 1..=steps {
        let mut next = raw_step(model, &u, opts.dt, prep);
        next.time = u0.time + i as f64 * opts.dt;
        check(&next, limit)?;
        u = next;
        if i % opts.record_every == 0 || i == steps {
            rec.push(model, u.clone());
        }
    }
    Ok(rec)
}

/// Final state only, without a ledger.
pub fn advance<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    u0: &SpectralState<T>,
    dt: f64,
    steps: usize,
    prep: Option<&PreparedNonlinearity>,
) -> Result<SpectralState<T>> {
    let limit = 1e6 * to_f64(u0.norm_h()).max(1.0);
    let mut u = u0.clone();
    for i in 1..=steps {
        let mut next = raw_step(model, &u, dt, prep);
        next.time = u0.time + i as f64 * dt;
        check(&next, limit)?;
        u = next;
    }
    Ok(u)
}
