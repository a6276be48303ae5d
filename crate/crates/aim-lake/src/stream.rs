//! Stream-function parametrization `u = b⁻¹∇⊥ψ` of the constrained space.

use crate::error::{Error, Result};
use crate::fields::CoefficientFields;
use crate::grid::Grid;
use crate::scalar::{lit, Real};
use crate::velocity::VelocityField;
use nalgebra::DVector;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    Cos,
    Sin,
}

/// Real stream mode `n_k cos(κ·x)` or `n_k sin(κ·x)`, `κ = (2π/L) k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamMode {
    pub k: [i64; 2],
    pub kind: ModeKind,
}

/// Retained real stream modes in lexicographic order over the half plane.
pub fn stream_modes(cutoff: usize) -> Vec<StreamMode> {
    let k = cutoff as i64;
    let mut out = Vec::new();
    for k1 in 0..=k {
        for k2 in -k..=k {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            for kind in [ModeKind::Cos, ModeKind::Sin] {
                out.push(StreamMode { k: [k1, k2], kind });
            }
        }
    }
    out
}

/// Normalization giving each mode unit Dirichlet energy `∫|∇φ|² = 1`.
pub fn mode_norm(grid: &Grid, m: &StreamMode) -> f64 {
    let k0 = grid.k0();
    let kk = ((m.k[0] * m.k[0] + m.k[1] * m.k[1]) as f64).sqrt() * k0;
    2f64.sqrt() / (grid.side_length * kk)
}

/// Scalar stream function on the retained modes, mean excluded.
///
/// `psi_hat[(k2+K)(2K+1) + (k1+K)]` is the coefficient of `e^{iκ·x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState<T: Real> {
    pub grid: Grid,
    pub psi_hat: Vec<Complex<T>>,
}

impl<T: Real> StreamState<T> {
    pub fn zeros(grid: &Grid) -> Self {
        let w = 2 * grid.mode_cutoff + 1;
        StreamState { grid: *grid, psi_hat: vec![Complex::new(T::zero(), T::zero()); w * w] }
    }

    fn slot(&self, k1: i64, k2: i64) -> usize {
        let kk = self.grid.mode_cutoff as i64;
        ((k2 + kk) * (2 * kk + 1) + (k1 + kk)) as usize
    }

    pub fn coeff(&self, k1: i64, k2: i64) -> Complex<T> {
        self.psi_hat[self.slot(k1, k2)]
    }

    /// Sets `ψ̂(k)` and its Hermitian partner.
    pub fn set(&mut self, k1: i64, k2: i64, c: Complex<T>) {
        if k1 == 0 && k2 == 0 {
            return;
        }
        let (a, b) = (self.slot(k1, k2), self.slot(-k1, -k2));
        self.psi_hat[a] = c;
        self.psi_hat[b] = c.conj();
    }

    /// Builds ψ from real mode amplitudes (unnormalized: `a cos + b sin`).
    pub fn from_real_modes(grid: &Grid, modes: &[StreamMode], amps: &[T]) -> Self {
        let mut s = Self::zeros(grid);
        let half = lit::<T>(0.5);
        for (m, &a) in modes.iter().zip(amps) {
            let c = s.coeff(m.k[0], m.k[1]);
            let add = match m.kind {
                ModeKind::Cos => Complex::new(a * half, T::zero()),
                ModeKind::Sin => Complex::new(T::zero(), -a * half),
            };
            s.set(m.k[0], m.k[1], c + add);
        }
        s
    }

    /// Full `M×M` FFT-convention spectrum of ψ.
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let g = &self.grid;
        let kk = g.mode_cutoff as i64;
        let scale = lit::<T>(g.len() as f64);
        let mut out = vec![Complex::new(T::zero(), T::zero()); g.len()];
        for k2 in -kk..=kk {
            for k1 in -kk..=kk {
                out[g.spec_index(k1, k2)] = self.coeff(k1, k2) * scale;
            }
        }
        out
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        let kk = self.grid.mode_cutoff as i64;
        (-kk..=kk).all(|k2| (-kk..=kk).all(|k1| (self.coeff(k1, k2) - self.coeff(-k1, -k2).conj()).norm() <= tol))
            && self.coeff(0, 0).norm() <= tol
    }
}

/// Accumulates mode amplitudes into an FFT-convention ψ spectrum.
pub(crate) fn mode_spectrum<T: Real>(grid: &Grid, modes: &[StreamMode], norms: &[T], amps: &[T]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let half = lit::<T>(0.5 * grid.len() as f64);
    for ((m, &n), &a) in modes.iter().zip(norms).zip(amps) {
        let c = a * n * half;
        let (p, q) = (grid.spec_index(m.k[0], m.k[1]), grid.spec_index(-m.k[0], -m.k[1]));
        match m.kind {
            ModeKind::Cos => {
                out[p].re += c;
                out[q].re += c;
            }
            ModeKind::Sin => {
                out[p].im -= c;
                out[q].im += c;
            }
        }
    }
    out
}

/// Loads `g_j = ∫ N·∇⊥φ_j` from the spectra of the two components of `N`.
pub(crate) fn mode_loads<T: Real>(
    grid: &Grid,
    modes: &[StreamMode],
    norms: &[T],
    f1: &[Complex<T>],
    f2: &[Complex<T>],
) -> DVector<T> {
    let k0 = lit::<T>(grid.k0());
    let h2 = lit::<T>(grid.cell_area());
    DVector::from_iterator(
        modes.len(),
        modes.iter().zip(norms).map(|(m, &n)| {
            let i = grid.spec_index(m.k[0], m.k[1]);
            let (k1, k2) = (lit::<T>(m.k[0] as f64) * k0, lit::<T>(m.k[1] as f64) * k0);
            let (a, b) = match m.kind {
                ModeKind::Cos => (f1[i].im, f2[i].im),
                ModeKind::Sin => (f1[i].re, f2[i].re),
            };
            h2 * n * (k1 * b - k2 * a)
        }),
    )
}

/// Velocity and its exact gradient from an FFT-convention ψ spectrum.
pub(crate) fn velocity_from_spectrum<T: Real>(fields: &CoefficientFields<T>, psi: &[Complex<T>]) -> VelocityField<T> {
    let g = &fields.grid;
    let m = g.m();
    let k0 = lit::<T>(g.k0());
    let n = g.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut sx = vec![zero; n];
    let mut sy = vec![zero; n];
    let mut sxx = vec![zero; n];
    let mut sxy = vec![zero; n];
    let mut syy = vec![zero; n];
    for iy in 0..m {
        let ky = lit::<T>(g.freq(iy) as f64) * k0;
        for ix in 0..m {
            let kx = lit::<T>(g.freq(ix) as f64) * k0;
            let i = iy * m + ix;
            let c = psi[i];
            let ic = Complex::new(-c.im, c.re);
            sx[i] = ic * kx;
            sy[i] = ic * ky;
            sxx[i] = -c * (kx * kx);
            sxy[i] = -c * (kx * ky);
            syy[i] = -c * (ky * ky);
        }
    }
    let fft = &fields.fft;
    let (px, py) = fft.inverse_pair(&sx, &sy);
    let (pxx, pxy) = fft.inverse_pair(&sxx, &sxy);
    let (pyy, _) = fft.inverse_pair(&syy, &vec![zero; n]);
    let mut u = [vec![T::zero(); n], vec![T::zero(); n]];
    let mut gr: [[Vec<T>; 2]; 2] = [[vec![T::zero(); n], vec![T::zero(); n]], [vec![T::zero(); n], vec![T::zero(); n]]];
    for i in 0..n {
        let ib = T::one() / fields.b[i];
        let (bx, by) = (fields.b_grad[0][i] * ib, fields.b_grad[1][i] * ib);
        let (q1, q2) = (-py[i], px[i]);
        let (u1, u2) = (q1 * ib, q2 * ib);
        u[0][i] = u1;
        u[1][i] = u2;
        gr[0][0][i] = -pxy[i] * ib - u1 * bx;
        gr[0][1][i] = -pyy[i] * ib - u1 * by;
        gr[1][0][i] = pxx[i] * ib - u2 * bx;
        gr[1][1][i] = pxy[i] * ib - u2 * by;
    }
    VelocityField { grid: *g, u, grad: Some(Box::new(gr)), constrained: true }
}

/// `u = b⁻¹∇⊥ψ` with `∇⊥ = (−∂_y, ∂_x)`.
pub fn stream_to_velocity<T: Real>(s: &StreamState<T>, fields: &CoefficientFields<T>) -> Result<VelocityField<T>> {
    if s.grid != fields.grid {
        return Err(Error::GridMismatch);
    }
    if fields.b_i <= T::zero() {
        return Err(Error::NonPositiveDepth { min: crate::scalar::to_f64(fields.b_i) });
    }
    Ok(velocity_from_spectrum(fields, &s.spectrum()))
}

fn flux_spectra<T: Real>(fields: &CoefficientFields<T>, u: &VelocityField<T>) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let n = fields.grid.len();
    let q1: Vec<T> = (0..n).map(|i| fields.b[i] * u.u[0][i]).collect();
    let q2: Vec<T> = (0..n).map(|i| fields.b[i] * u.u[1][i]).collect();
    fields.fft.forward_pair(&q1, &q2)
}

/// Recovers ψ from `b u = ∇⊥ψ` on the retained modes.
pub fn velocity_to_stream<T: Real>(u: &VelocityField<T>, fields: &CoefficientFields<T>) -> Result<StreamState<T>> {
    if u.grid != fields.grid {
        return Err(Error::GridMismatch);
    }
    let g = &fields.grid;
    let (f1, f2) = flux_spectra(fields, u);
    let k0 = lit::<T>(g.k0());
    let inv = T::one() / lit::<T>(g.len() as f64);
    let kk = g.mode_cutoff as i64;
    let mut s = StreamState::zeros(g);
    for k2 in -kk..=kk {
        for k1 in -kk..=kk {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let i = g.spec_index(k1, k2);
            let (a, b) = (lit::<T>(k1 as f64) * k0, lit::<T>(k2 as f64) * k0);
            let num = f1[i] * b - f2[i] * a;
            let c = Complex::new(-num.im, num.re) * (inv / (a * a + b * b));
            let slot = s.slot(k1, k2);
            s.psi_hat[slot] = c;
        }
    }
    Ok(s)
}

/// Largest retained-mode coefficient of `∇·(bu)` relative to that of `∇(bu)`.
pub fn weighted_divergence_residual<T: Real>(u: &VelocityField<T>, fields: &CoefficientFields<T>) -> Result<T> {
    if u.grid != fields.grid {
        return Err(Error::GridMismatch);
    }
    let g = &fields.grid;
    let (f1, f2) = flux_spectra(fields, u);
    let kk = g.mode_cutoff as i64;
    let (mut div, mut scale) = (T::zero(), T::zero());
    for k2 in -kk..=kk {
        for k1 in -kk..=kk {
            let i = g.spec_index(k1, k2);
            let (a, b) = (lit::<T>(k1 as f64), lit::<T>(k2 as f64));
            div = div.max((f1[i] * a + f2[i] * b).norm());
            scale = scale.max((f1[i].norm() + f2[i].norm()) * (a * a + b * b).sqrt());
        }
    }
    Ok(if scale > T::zero() { div / scale } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_fields, FieldSource, FieldSpec};
    use std::f64::consts::PI;

    #[test]
    fn mode_count() {
        assert_eq!(stream_modes(2).len(), 24);
        assert_eq!(stream_modes(6).len(), 168);
        assert_eq!(stream_modes(8).len(), 288);
    }

    #[test]
    fn sine_stream_gives_cosine_velocity() {
        let g = Grid::new(2.0 * PI, 16, 2).unwrap();
        let f = sample_fields::<f64>(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap();
        let modes = [StreamMode { k: [1, 0], kind: ModeKind::Sin }];
        let s = StreamState::from_real_modes(&g, &modes, &[1.0]);
        assert!(s.is_hermitian(1e-15));
        let u = stream_to_velocity(&s, &f).unwrap();
        for i in 0..g.len() {
            let (x, _) = g.point(i);
            assert!(u.u[0][i].abs() < 1e-13);
            assert!((u.u[1][i] - x.cos()).abs() < 1e-13);
        }
        let zero = stream_to_velocity(&StreamState::zeros(&g), &f).unwrap();
        assert!(zero.u.iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn variable_depth_round_trip() {
        let g = Grid::new(2.0 * PI, 32, 6).unwrap();
        let mut spec = FieldSpec::constant(1.0, 1.0, 0.0);
        spec.b = FieldSource::expr("2 + sin(x) + 0.3*cos(2*y)").unwrap();
        let f = sample_fields::<f64>(&g, &spec).unwrap();
        let modes = stream_modes(6);
        let amps: Vec<f64> = (0..modes.len()).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let s = StreamState::from_real_modes(&g, &modes, &amps);
        let u = stream_to_velocity(&s, &f).unwrap();
        assert!(weighted_divergence_residual(&u, &f).unwrap() < 1e-12);
        let back = velocity_to_stream(&u, &f).unwrap();
        let err = s.psi_hat.iter().zip(&back.psi_hat).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}
