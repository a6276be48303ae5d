//! The periodic square `[0, L)^2`, its sample points and 2-D FFTs.
//!
//! Grid arrays are row-major with `x` fastest: `idx = iy * M + ix`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub side_length: f64,
    pub points_per_side: usize,
    pub mode_cutoff: usize,
}

impl Grid {
    pub fn new(side_length: f64, points_per_side: usize, mode_cutoff: usize) -> Result<Self> {
        let g = Grid { side_length, points_per_side, mode_cutoff };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::InvalidGrid(format!("side length {} must be positive", self.side_length)));
        }
        if !self.points_per_side.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("M = {} is not a power of two", self.points_per_side)));
        }
        if self.mode_cutoff == 0 {
            return Err(Error::InvalidGrid("mode cutoff K must be at least 1".into()));
        }
        if self.points_per_side < 4 * self.mode_cutoff + 2 {
            return Err(Error::InvalidGrid(format!(
                "M = {} violates M >= 4K+2 with K = {}",
                self.points_per_side, self.mode_cutoff
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.points_per_side
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_side * self.points_per_side
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points_per_side == 0
    }

    pub fn spacing(&self) -> f64 {
        self.side_length / self.points_per_side as f64
    }

    /// Quadrature weight of one sample (trapezoid rule on the torus).
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Fundamental wavenumber `2π/L`.
    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.side_length
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let m = self.m();
        let h = self.spacing();
        ((idx % m) as f64 * h, (idx / m) as f64 * h)
    }

    /// Signed integer frequency of FFT bin `j`, with the Nyquist bin mapped to 0.
    #[inline]
    pub fn freq(&self, j: usize) -> i64 {
        let m = self.m();
        if 2 * j < m {
            j as i64
        } else if 2 * j == m {
            0
        } else {
            j as i64 - m as i64
        }
    }

    /// FFT bin of a signed frequency.
    #[inline]
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.m() as i64) as usize
    }

    /// Grid index of the FFT coefficient for wavevector `(k1, k2)`.
    #[inline]
    pub fn spec_index(&self, k1: i64, k2: i64) -> usize {
        self.bin(k2) * self.m() + self.bin(k1)
    }

    /// The same torus sampled `factor` times more finely.
    pub fn refined(&self, factor: usize) -> Grid {
        Grid { points_per_side: self.points_per_side * factor, ..*self }
    }
}

/// Planned forward/inverse 2-D transforms for one grid size.
///
/// Forward: `F[k] = Σ_x u(x) e^{-i k·x}`; inverse carries the `1/M²`.
pub struct Fft2<T: Real> {
    m: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({})", self.m)
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { m, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn transform(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        plan.process(buf);
        transpose(buf, self.m);
        plan.process(buf);
        transpose(buf, self.m);
    }

    pub fn forward_complex(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, &self.fwd);
    }

    /// Unnormalized inverse; callers divide by `M²`.
    pub fn inverse_complex_raw(&self, buf: &mut [Complex<T>]) {
        self.transform(buf, &self.inv);
    }

    pub fn forward(&self, u: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = u.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward_complex(&mut buf);
        buf
    }

    /// Transforms two real fields with one complex FFT.
    pub fn forward_pair(&self, a: &[T], b: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let mut z: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
        self.forward_complex(&mut z);
        let m = self.m;
        let half = lit::<T>(0.5);
        let mut fa = vec![Complex::new(T::zero(), T::zero()); m * m];
        let mut fb = fa.clone();
        for iy in 0..m {
            for ix in 0..m {
                let i = iy * m + ix;
                let j = ((m - iy) % m) * m + (m - ix) % m;
                let zc = z[j].conj();
                fa[i] = (z[i] + zc) * half;
                let d = (z[i] - zc) * half;
                fb[i] = Complex::new(d.im, -d.re);
            }
        }
        (fa, fb)
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse_real(&self, mut spec: Vec<Complex<T>>) -> Vec<T> {
        self.inverse_complex_raw(&mut spec);
        let s = T::one() / lit::<T>((self.m * self.m) as f64);
        spec.into_iter().map(|c| c.re * s).collect()
    }

    /// Inverse transform of two Hermitian spectra with one complex FFT.
    pub fn inverse_pair(&self, a: &[Complex<T>], b: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
        let mut z: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| x + Complex::new(-y.im, y.re)).collect();
        self.inverse_complex_raw(&mut z);
        let s = T::one() / lit::<T>((self.m * self.m) as f64);
        z.iter().map(|c| (c.re * s, c.im * s)).unzip()
    }
}

fn transpose<T: Copy>(buf: &mut [T], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            buf.swap(i * m + j, j * m + i);
        }
    }
}

/// Spectral partial derivatives of a real periodic grid field.
pub fn spectral_gradient<T: Real>(grid: &Grid, fft: &Fft2<T>, u: &[T]) -> [Vec<T>; 2] {
    let spec = fft.forward(u);
    let m = grid.m();
    let k0 = lit::<T>(grid.k0());
    let mut dx = spec.clone();
    let mut dy = spec;
    for iy in 0..m {
        let ky = lit::<T>(grid.freq(iy) as f64) * k0;
        for ix in 0..m {
            let kx = lit::<T>(grid.freq(ix) as f64) * k0;
            let i = iy * m + ix;
            let c = dx[i];
            dx[i] = Complex::new(-c.im * kx, c.re * kx);
            dy[i] = Complex::new(-c.im * ky, c.re * ky);
        }
    }
    let (gx, gy) = fft.inverse_pair(&dx, &dy);
    [gx, gy]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Grid::new(1.0, 32, 6).is_ok());
        assert!(Grid::new(1.0, 16, 4).is_err());
        assert!(Grid::new(1.0, 24, 2).is_err());
        assert!(Grid::new(0.0, 32, 2).is_err());
    }

    #[test]
    fn pair_transforms_round_trip() {
        let g = Grid::new(2.0, 16, 2).unwrap();
        let fft = Fft2::<f64>::new(16);
        let a: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.11).cos() + 0.3).collect();
        let (fa, fb) = fft.forward_pair(&a, &b);
        let fa1 = fft.forward(&a);
        for (x, y) in fa.iter().zip(&fa1) {
            assert!((x - y).norm() < 1e-12);
        }
        let (a2, b2) = fft.inverse_pair(&fa, &fb);
        for i in 0..g.len() {
            assert!((a[i] - a2[i]).abs() < 1e-13 && (b[i] - b2[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_trig_polynomial_is_exact() {
        let g = Grid::new(4.0, 32, 2).unwrap();
        let fft = Fft2::<f64>::new(32);
        let k = g.k0();
        let u: Vec<f64> = (0..g.len())
            .map(|i| {
                let (x, y) = g.point(i);
                (2.0 * k * x).sin() * (3.0 * k * y).cos()
            })
            .collect();
        let [gx, gy] = spectral_gradient(&g, &fft, &u);
        for i in 0..g.len() {
            let (x, y) = g.point(i);
            let ex = 2.0 * k * (2.0 * k * x).cos() * (3.0 * k * y).cos();
            let ey = -3.0 * k * (2.0 * k * x).sin() * (3.0 * k * y).sin();
            assert!((gx[i] - ex).abs() < 1e-12 && (gy[i] - ey).abs() < 1e-12);
        }
    }
}
