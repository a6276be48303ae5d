//! Body forcings `f(x,t) = s(t)·F(x)`.

use crate::basis::ConstrainedBasis;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{lit, to_f64, Real};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingModel {
    #[default]
    Zero,
    /// `A (k₂ sin θ, −k₁ sin θ)/|k|`, `θ = κ·x`: plain divergence free, steady.
    SteadyLowMode { wavevector: [i64; 2], amplitude: f64 },
    /// `A w_index` (one-based), defined directly in the eigenbasis.
    Eigenmode { index: usize, amplitude: f64 },
    /// The steady low-mode profile damped by `(1+t)^{-2}`.
    IntegrableL1 { wavevector: [i64; 2], amplitude: f64 },
    /// `f = κ(e+t)^{-2} (0, ∂ₓg)/‖∂ₓg‖₂` with `g` a periodized Gaussian of the given width.
    DerivativeForm { kappa: f64, width: f64 },
}

impl ForcingModel {
    pub fn validate(&self, grid: &Grid, dim: usize) -> Result<()> {
        match *self {
            ForcingModel::SteadyLowMode { wavevector, .. } | ForcingModel::IntegrableL1 { wavevector, .. } => {
                let k = grid.mode_cutoff as i64;
                if wavevector == [0, 0] || wavevector[0].abs() > k || wavevector[1].abs() > k {
                    return Err(Error::config("forcing.wavevector", format!("{wavevector:?} is zero or beyond K = {k}")));
                }
            }
            ForcingModel::Eigenmode { index, .. } => {
                if index == 0 || index > dim {
                    return Err(Error::config("forcing.index", format!("{index} outside 1..={dim}")));
                }
            }
            ForcingModel::DerivativeForm { width, kappa } => {
                if !(width > 0.0 && kappa >= 0.0) {
                    return Err(Error::config("forcing", "DerivativeForm needs width > 0 and kappa >= 0"));
                }
            }
            ForcingModel::Zero => {}
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            ForcingModel::Zero => true,
            ForcingModel::SteadyLowMode { amplitude, .. }
            | ForcingModel::Eigenmode { amplitude, .. }
            | ForcingModel::IntegrableL1 { amplitude, .. } => amplitude == 0.0,
            ForcingModel::DerivativeForm { kappa, .. } => kappa == 0.0,
        }
    }

    /// `s(t)`.
    pub fn time_factor(&self, t: f64) -> f64 {
        match *self {
            ForcingModel::Zero => 0.0,
            ForcingModel::SteadyLowMode { .. } | ForcingModel::Eigenmode { .. } => 1.0,
            ForcingModel::IntegrableL1 { .. } => (1.0 + t).powi(-2),
            ForcingModel::DerivativeForm { kappa, .. } => kappa * (E + t).powi(-2),
        }
    }

    /// `∫₀^∞ s(t) dt` in closed form (infinite for steady forcing).
    pub fn time_integral(&self) -> f64 {
        match *self {
            ForcingModel::Zero => 0.0,
            ForcingModel::SteadyLowMode { .. } | ForcingModel::Eigenmode { .. } => f64::INFINITY,
            ForcingModel::IntegrableL1 { .. } => 1.0,
            ForcingModel::DerivativeForm { kappa, .. } => kappa / E,
        }
    }

    /// The spatial profile `F` on the grid; `None` for eigenbasis forcings.
    pub fn profile(&self, grid: &Grid) -> Option<[Vec<f64>; 2]> {
        let n = grid.len();
        match *self {
            ForcingModel::Zero => Some([vec![0.0; n], vec![0.0; n]]),
            ForcingModel::Eigenmode { .. } => None,
            ForcingModel::SteadyLowMode { wavevector, amplitude } | ForcingModel::IntegrableL1 { wavevector, amplitude } => {
                let k0 = grid.k0();
                let (k1, k2) = (wavevector[0] as f64, wavevector[1] as f64);
                let kn = (k1 * k1 + k2 * k2).sqrt();
                let mut out = [vec![0.0; n], vec![0.0; n]];
                for i in 0..n {
                    let (x, y) = grid.point(i);
                    let s = (k0 * (k1 * x + k2 * y)).sin();
                    out[0][i] = amplitude * k2 * s / kn;
                    out[1][i] = -amplitude * k1 * s / kn;
                }
                Some(out)
            }
            ForcingModel::DerivativeForm { width, .. } => {
                let gx: Vec<f64> = (0..n).map(|i| gaussian(grid, width, i)[1]).collect();
                let norm = (gx.iter().map(|v| v * v).sum::<f64>() * grid.cell_area()).sqrt();
                Some([vec![0.0; n], gx.into_iter().map(|v| v / norm).collect()])
            }
        }
    }

    /// The potential `g(·,t)` of a derivative-form forcing, scaled so that `f = (0, ∂ₓg)`.
    pub fn potential(&self, grid: &Grid, t: f64) -> Option<Vec<f64>> {
        let ForcingModel::DerivativeForm { width, .. } = *self else { return None };
        let n = grid.len();
        let gx: Vec<f64> = (0..n).map(|i| gaussian(grid, width, i)[1]).collect();
        let norm = (gx.iter().map(|v| v * v).sum::<f64>() * grid.cell_area()).sqrt();
        let s = self.time_factor(t) / norm;
        Some((0..n).map(|i| s * gaussian(grid, width, i)[0]).collect())
    }

    /// Eigenbasis coordinates of `F`.
    pub fn coords<T: Real>(&self, basis: &ConstrainedBasis<T>) -> DVector<T> {
        match *self {
            ForcingModel::Eigenmode { index, amplitude } => {
                let mut c = DVector::zeros(basis.dim());
                c[index - 1] = lit(amplitude);
                c
            }
            _ => {
                let p = self.profile(&basis.fields.grid).expect("physical profile");
                basis.project_field(&[p[0].iter().map(|&v| lit(v)).collect(), p[1].iter().map(|&v| lit(v)).collect()])
            }
        }
    }

    /// `|F|_b = (∫ b |F|²)^{1/2}` of the physical profile (eigenbasis norm for `Eigenmode`).
    pub fn profile_norm_b<T: Real>(&self, basis: &ConstrainedBasis<T>) -> f64 {
        match self.profile(&basis.fields.grid) {
            None => to_f64(crate::scalar::norm2(&self.coords(basis))),
            Some(p) => {
                let b = &basis.fields.b;
                let s: f64 = (0..p[0].len()).map(|i| to_f64(b[i]) * (p[0][i] * p[0][i] + p[1][i] * p[1][i])).sum();
                (s * basis.fields.grid.cell_area()).sqrt()
            }
        }
    }

    /// `sup_t |f(t)|_b`.
    pub fn sup_norm_b<T: Real>(&self, basis: &ConstrainedBasis<T>) -> f64 {
        let s = match *self {
            ForcingModel::DerivativeForm { kappa, .. } => kappa / (E * E),
            ForcingModel::Zero => 0.0,
            _ => 1.0,
        };
        s * self.profile_norm_b(basis)
    }
}

/// Periodized Gaussian centered in the box: `[g, ∂ₓg]` at grid point `i`.
fn gaussian(grid: &Grid, width: f64, i: usize) -> [f64; 2] {
    let l = grid.side_length;
    let (x, y) = grid.point(i);
    let (mut g, mut gx) = (0.0, 0.0);
    for a in -2..=2 {
        for b in -2..=2 {
            let dx = x - 0.5 * l + a as f64 * l;
            let dy = y - 0.5 * l + b as f64 * l;
            let v = (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
            g += v;
            gx += -dx / (width * width) * v;
        }
    }
    [g, gx]
}
