use super::config::AimConfig;
use crate::dynamics::{advection_theta, GalerkinModel, PreparedNonlinearity};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use nalgebra::DVector;
use parking_lot::RwLock;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

type Memo<T> = RwLock<HashMap<Vec<i64>, DVector<T>>>;

struct PhiCore<T: Real> {
    model: Arc<dyn GalerkinModel<T>>,
    cfg: AimConfig,
    prep: Option<PreparedNonlinearity>,
    /// `Q_n f`, constant in time.
    forcing: DVector<T>,
    memo: Vec<Memo<T>>,
    evals: AtomicUsize,
}

/// Handle on level `N` of the sequence `Φ_N`.
#[derive(Clone)]
pub struct AimEvaluator<T: Real> {
    pub level: usize,
    core: Arc<PhiCore<T>>,
}

impl<T: Real> std::fmt::Debug for AimEvaluator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AimEvaluator").field("level", &self.level).field("n", &self.core.cfg.n).finish()
    }
}

/// The two parts of `F^N_τ φ(y₀)`: the quadrature over the window
/// `[−(N+1)τ, 0]` and the tail from before it.
#[derive(Debug, Clone, PartialEq)]
pub struct MapParts<T: Real> {
    pub window: DVector<T>,
    pub tail: DVector<T>,
}

impl<T: Real> MapParts<T> {
    pub fn total(&self) -> DVector<T> {
        &self.window + &self.tail
    }
}

/// Builds handles for `Φ_0 … Φ_{cfg.levels}` sharing one memo and budget.
pub fn build_phi_sequence<T: Real>(model: Arc<dyn GalerkinModel<T>>, cfg: AimConfig) -> Result<Vec<AimEvaluator<T>>> {
    cfg.validate(model.dim())?;
    let mut forcing = model.forcing(0.0);
    for k in 0..cfg.n {
        forcing[k] = T::zero();
    }
    let core = Arc::new(PhiCore {
        prep: cfg.prep(),
        memo: (0..=cfg.levels).map(|_| RwLock::new(HashMap::new())).collect(),
        evals: AtomicUsize::new(0),
        forcing,
        model,
        cfg,
    });
    Ok((0..=core.cfg.levels).map(|level| AimEvaluator { level, core: core.clone() }).collect())
}

impl<T: Real> AimEvaluator<T> {
    pub fn config(&self) -> &AimConfig {
        &self.core.cfg
    }

    pub fn model(&self) -> &Arc<dyn GalerkinModel<T>> {
        &self.core.model
    }

    pub fn parent(&self) -> Option<AimEvaluator<T>> {
        (self.level > 0).then(|| AimEvaluator { level: self.level - 1, core: self.core.clone() })
    }

    /// Non-memoized evaluations so far, summed over levels.
    pub fn evaluations(&self) -> usize {
        self.core.evals.load(Ordering::Relaxed)
    }

    pub fn clear_memo(&self) {
        self.core.memo.iter().for_each(|m| m.write().clear());
    }

    fn key(&self, y: &DVector<T>) -> Vec<i64> {
        let n = self.core.cfg.n;
        match self.core.cfg.memo_quantum {
            Some(q) => y.iter().take(n).map(|&v| (to_f64(v) / q).round() as i64).collect(),
            None => y.iter().take(n).map(|&v| to_f64(v).to_bits() as i64).collect(),
        }
    }

    /// `Φ_N(y)`, supported on modes `n+1 … D`.
    pub fn eval(&self, y: &DVector<T>) -> Result<DVector<T>> {
        if self.level == 0 {
            return Ok(DVector::zeros(self.core.model.dim()));
        }
        let key = self.key(y);
        if let Some(v) = self.core.memo[self.level].read().get(&key) {
            return Ok(v.clone());
        }
        let v = self.eval_parts(y)?.total();
        self.core.memo[self.level].write().insert(key, v.clone());
        Ok(v)
    }

    /// Window and tail parts of `Φ_N(y) = F^{N−1}_{τ_{N−1}} Φ_{N−1}(y)`.
    pub fn eval_parts(&self, y: &DVector<T>) -> Result<MapParts<T>> {
        let parent = self.parent().expect("level 0 has no parts");
        let count = self.core.evals.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(b) = self.core.cfg.budget {
            if count > b {
                return Err(Error::BudgetExceeded(b));
            }
        }
        let steps = self.level - 1;
        apply_f_n_tau(&parent, y, self.core.cfg.tau(steps), steps)
    }
}

fn low<T: Real>(v: &mut DVector<T>, n: usize) {
    for k in n..v.len() {
        v[k] = T::zero();
    }
}

fn high<T: Real>(v: &mut DVector<T>, n: usize) {
    for k in 0..n.min(v.len()) {
        v[k] = T::zero();
    }
}

/// Backward Euler iterates `y_0 … y_steps` for the low modes, with `z_k = φ(y_k)`.
///
/// `y_{k+1} = (I+τA)y_k + τP_nE y_k − τP_n(f − B_θ(y_k + z_k))`, which is the
/// simulated semiflow run backwards.
pub fn backward_euler_sequence<T: Real>(
    phi: &AimEvaluator<T>,
    y0: &DVector<T>,
    tau: f64,
    steps: usize,
) -> Result<(Vec<DVector<T>>, Vec<DVector<T>>)> {
    let core = &phi.core;
    let model = &core.model;
    let n = core.cfg.n;
    let lam = model.eigenvalues();
    let t = lit::<T>(tau);
    let mut y = y0.clone();
    low(&mut y, n);
    let guard = 1e6 * core.prep.map(|p| p.rho1).unwrap_or_else(|| to_f64(model.norm_v(&y)).max(1.0));
    let mut f = model.forcing(0.0);
    low(&mut f, n);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut zs = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let nv = to_f64(model.norm_v(&y));
        if !nv.is_finite() || nv > guard {
            return Err(Error::BackwardBlowUp { step: k, norm: nv });
        }
        let z = phi.eval(&y)?;
        if k < steps {
            let u = &y + &z;
            let mut rhs = &f - advection_theta(model.as_ref(), &u, core.prep.as_ref());
            low(&mut rhs, n);
            let mut e = model.friction(&y);
            low(&mut e, n);
            let mut next = y.clone();
            for i in 0..n {
                next[i] += t * lam[i] * y[i];
            }
            next += (e - rhs) * t;
            ys.push(std::mem::replace(&mut y, next));
        } else {
            ys.push(y.clone());
        }
        zs.push(z);
    }
    Ok((ys, zs))
}

/// `F^N_τ φ(y₀)` split into window and tail.
///
/// With `g_k = Q_n(f − B_θ(y_k+z_k)) − Q_nE z_k` the window is
/// `Σ_{k=0}^{N} A⁻¹(I − e^{−Aτ})e^{−kAτ} g_k` and the tail `A⁻¹e^{−(N+1)Aτ} g_N`;
/// together they equal the sum over `k < N` plus `A⁻¹e^{−NAτ}g_N`. The literal
/// variant uses `(I − e^{−A})` for `k < N` and puts `A⁻¹e^{−NAτ}g_N` in the tail.
pub fn apply_f_n_tau<T: Real>(phi: &AimEvaluator<T>, y0: &DVector<T>, tau: f64, steps: usize) -> Result<MapParts<T>> {
    let core = &phi.core;
    let model = &core.model;
    let n = core.cfg.n;
    let d = model.dim();
    let lam = model.eigenvalues();
    let (ys, zs) = backward_euler_sequence(phi, y0, tau, steps)?;
    let mut window = DVector::<T>::zeros(d);
    let mut tail = DVector::<T>::zeros(d);
    for k in 0..=steps {
        let u = &ys[k] + &zs[k];
        let mut g = &core.forcing - advection_theta(model.as_ref(), &u, core.prep.as_ref()) - model.friction(&zs[k]);
        high(&mut g, n);
        for i in n..d {
            let l = to_f64(lam[i]);
            let gi = to_f64(g[i]);
            let decay_k = (-(k as f64) * l * tau).exp();
            if core.cfg.paper_literal {
                if k < steps {
                    window[i] += lit::<T>((1.0 - (-l).exp()) * decay_k * gi / l);
                } else {
                    tail[i] = lit::<T>(decay_k * gi / l);
                }
            } else {
                window[i] += lit::<T>((-(l * tau)).exp_m1().abs() * decay_k * gi / l);
                if k == steps {
                    tail[i] = lit::<T>((-((k + 1) as f64) * l * tau).exp() * gi / l);
                }
            }
        }
    }
    Ok(MapParts { window, tail })
}
