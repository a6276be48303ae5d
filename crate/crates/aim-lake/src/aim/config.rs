use crate::dynamics::{AbsorbingEstimates, PreparedNonlinearity};
use crate::error::{Error, Result};
use crate::oracle::gamma_quadrature;
use crate::scalar::{to_f64, Real};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Settings of the recursion `Φ_0 = 0`, `Φ_{N+1} = F^N_{τ_N}(Φ_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AimConfig {
    /// Low-mode cut.
    pub n: usize,
    /// Highest level `N` that will be built.
    pub levels: usize,
    /// `τ_N`, used to build level `N+1`.
    pub tau_schedule: Vec<f64>,
    /// Use the printed `(I − e^{−A})` prefactor instead of `(I − e^{−Aτ})`.
    #[serde(default)]
    pub paper_literal: bool,
    /// Memo resolution on the low coordinates; `None` keys on exact bits.
    pub memo_quantum: Option<f64>,
    /// Cap on non-memoized evaluations across all levels.
    pub budget: Option<usize>,
    /// Cutoff radius for `B_θ`; `None` uses the raw nonlinearity.
    pub rho1: Option<f64>,
}

impl AimConfig {
    pub fn new(n: usize, levels: usize, tau: f64) -> Self {
        AimConfig {
            n,
            levels,
            tau_schedule: vec![tau; levels.max(1)],
            paper_literal: false,
            memo_quantum: Some(1e-6),
            budget: None,
            rho1: None,
        }
    }

    /// `τ_N = window/(N+1)`, so every level integrates over the same window.
    pub fn with_window(mut self, window: f64) -> Self {
        self.tau_schedule = (0..self.levels.max(1)).map(|k| window / (k as f64 + 1.0)).collect();
        self
    }

    pub fn prep(&self) -> Option<PreparedNonlinearity> {
        self.rho1.map(PreparedNonlinearity::new)
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.tau_schedule[level.min(self.tau_schedule.len() - 1)]
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n == 0 || self.n >= dim {
            return Err(Error::config("aim.n", format!("{} outside 1..{dim}", self.n)));
        }
        if self.tau_schedule.is_empty() || self.tau_schedule.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::config("aim.tau_schedule", "all tau must be positive"));
        }
        Ok(())
    }
}

/// Constants entering the existence and approximation statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimConstants {
    pub n: usize,
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub b_bar: f64,
    pub nu_i: f64,
    pub eta_bar: f64,
    /// `λ₁^{-1/2}`: `|u| ≤ Π‖u‖_V`.
    pub poincare: f64,
    pub gamma: f64,
    pub f_norm_b: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub m0: f64,
    pub m1: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// `l` with the ratio evaluated at the chosen `n`.
    pub l: f64,
    /// `l` with the supremum over all cuts.
    pub l_sup: f64,
    pub big_l0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub chi: f64,
    pub xi: f64,
    pub mu: f64,
}

impl AimConstants {
    /// `M1 + Πη̄`.
    pub fn lip_x(&self) -> f64 {
        self.m1 + self.poincare * self.eta_bar
    }

    /// Upper end of the admissible window `(N+1)τ`.
    pub fn window_max(&self) -> f64 {
        let x = self.lip_x();
        if x == 0.0 {
            f64::INFINITY
        } else {
            self.delta1 / x * (self.b_bar * self.nu_i / self.lambda_n).sqrt()
        }
    }

    /// `4 b̄^{-1/2}(M0 + η̄ρ0) λ_{n+1}^{-1/2} e^{−λ_{n+1}χ}`.
    pub fn paper_target(&self) -> f64 {
        4.0 * self.b_bar.powf(-0.5) * (self.m0 + self.eta_bar * self.rho0) * self.lambda_n1.powf(-0.5) * (-self.lambda_n1 * self.chi).exp()
    }

    /// Flat-Galerkin bound `b̄^{-1/2}(M0+|f|_b+η̄ρ0)(γν_i^{-1/2}+1)λ_{n+1}^{-1/2}`.
    pub fn high_mode_bound(&self) -> f64 {
        self.b_bar.powf(-0.5)
            * (self.m0 + self.f_norm_b + self.eta_bar * self.rho0)
            * (self.gamma * self.nu_i.powf(-0.5) + 1.0)
            * self.lambda_n1.powf(-0.5)
    }
}

fn xi_for(lambda_n: f64, lambda_n1: f64, b_bar: f64, nu_i: f64, x: f64, l: f64, delta1: f64) -> f64 {
    let e = (delta1 * (l + 1.0)).exp();
    b_bar.powf(-0.5) * (l + 1.0) * e * (2.0 * x.powf(1.5) * (b_bar / (nu_i * lambda_n)).powf(0.25) + x * x * (nu_i * lambda_n1).powf(-0.5))
        + e * (nu_i * lambda_n1 / lambda_n).sqrt()
}

/// Left side of the sufficient condition fixing `δ2` (decreasing in `δ2`).
fn delta2_lhs(d2: f64, b_bar: f64, nu_i: f64, x: f64, delta0: f64) -> f64 {
    b_bar.powf(-0.5) * (2.0 * x.powf(1.5) * (b_bar / (nu_i * d2)).powf(0.25) + x * x * (nu_i * d2).powf(-0.5)) * delta0.exp()
}

/// Smallest `δ2` meeting the sufficient condition, by bisection on a log scale.
pub fn delta2_from_condition(b_bar: f64, nu_i: f64, x: f64, delta0: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    while delta2_lhs(hi, b_bar, nu_i, x, delta0) > 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if delta2_lhs(mid, b_bar, nu_i, x, delta0) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Optional overrides for the condition constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub delta0: Option<f64>,
    pub delta2: Option<f64>,
    pub delta3: Option<f64>,
    pub chi: Option<f64>,
}

/// Assembles every constant from the spectrum, the fields and measured absorbing data.
pub fn aim_constants<T: Real>(
    eigenvalues: &DVector<T>,
    b_bar: f64,
    nu_i: f64,
    eta_bar: f64,
    f_norm_b: f64,
    est: &AbsorbingEstimates,
    n: usize,
    overrides: &ConstantOverrides,
) -> Result<AimConstants> {
    let d = eigenvalues.len();
    if n == 0 || n >= d {
        return Err(Error::IndexOutOfRange { index: n, max: d - 1 });
    }
    let lam: Vec<f64> = eigenvalues.iter().map(|&v| to_f64(v)).collect();
    let (ln, ln1) = (lam[n - 1], lam[n]);
    let ratio = |k: usize| (nu_i * lam[k] / lam[k - 1]).sqrt();
    let s_n = ratio(n);
    let s_sup = (1..d).map(ratio).fold(0.0, f64::max);
    let l = 6.0 * (0.5 + s_n);
    let l_sup = 6.0 * (0.5 + s_sup);
    let gamma = gamma_quadrature();
    let poincare = lam[0].powf(-0.5);
    let x = est.m1 + poincare * eta_bar;
    let delta0 = overrides.delta0.unwrap_or((1.5f64).ln() / l);
    let delta1 = delta0.min((1.5f64).ln() / l);
    let delta2 = overrides.delta2.unwrap_or_else(|| delta2_from_condition(b_bar, nu_i, x, delta0));
    let g = gamma * nu_i.powf(-0.5) + 1.0;
    let delta3 = overrides.delta3.unwrap_or(4.0 * x * x / b_bar * ((3.0 + 6.0 * s_n) * nu_i.powf(-0.5) + g).powi(2));
    let chi = overrides.chi.unwrap_or(0.5 * delta1);
    let big_l0 = b_bar.powf(-0.5) * (f_norm_b + est.m0 + eta_bar * est.rho0) * g * ln1.powf(-0.5);
    let xi = xi_for(ln, ln1, b_bar, nu_i, x, l, delta1);
    let mu = b_bar.sqrt() * x * (l * (ln * nu_i).powf(-0.5) + g * ln1.powf(-0.5));
    Ok(AimConstants {
        n,
        lambda_n: ln,
        lambda_n1: ln1,
        b_bar,
        nu_i,
        eta_bar,
        poincare,
        gamma,
        f_norm_b,
        rho0: est.rho0,
        rho1: est.rho1,
        m0: est.m0,
        m1: est.m1,
        beta1: est.beta1,
        beta2: est.beta2,
        l,
        l_sup,
        big_l0,
        delta0,
        delta1,
        delta2,
        delta3,
        chi,
        xi,
        mu,
    })
}

/// Schedule satisfying `χ ≤ τ_N(N+1) ≤ window_max` when that interval is nonempty.
///
/// Returns the schedule and whether the window condition holds.
pub fn window_schedule(c: &AimConstants, levels: usize) -> (Vec<f64>, bool) {
    let hi = c.window_max();
    let ok = c.chi <= hi;
    let w = if hi.is_finite() { hi.max(c.chi) } else { c.chi.max(1.0 / c.lambda_n1) };
    ((0..levels.max(1)).map(|k| w / (k as f64 + 1.0)).collect(), ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta2_meets_its_condition_tightly() {
        let d2 = delta2_from_condition(0.5, 0.1, 0.3, 0.05);
        assert!(delta2_lhs(d2, 0.5, 0.1, 0.3, 0.05) <= 0.5);
        assert!(delta2_lhs(d2 * 0.99, 0.5, 0.1, 0.3, 0.05) > 0.5);
        assert_eq!(delta2_from_condition(0.5, 0.1, 0.0, 0.05), 0.0);
    }
}
