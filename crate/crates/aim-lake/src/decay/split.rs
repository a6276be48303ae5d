use crate::grid::Grid;
use crate::oracle::adaptive_simpson;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// `û(ξ) = ∫ u e^{−iξ·x}` of both components on the dual lattice.
#[derive(Debug, Clone)]
pub struct FourierField {
    pub grid: Grid,
    pub hat: [Vec<Complex<f64>>; 2],
}

impl FourierField {
    pub fn new(grid: &Grid, fft: &crate::grid::Fft2<f64>, u: &[Vec<f64>; 2]) -> Self {
        let (a, b) = fft.forward_pair(&u[0], &u[1]);
        let h = grid.cell_area();
        FourierField { grid: *grid, hat: [a.into_iter().map(|c| c * h).collect(), b.into_iter().map(|c| c * h).collect()] }
    }

    /// `|ξ|²` at flat index `i`.
    pub fn xi2(&self, i: usize) -> f64 {
        let m = self.grid.m();
        let k0 = self.grid.k0();
        let (kx, ky) = (self.grid.freq(i % m) as f64 * k0, self.grid.freq(i / m) as f64 * k0);
        kx * kx + ky * ky
    }

    /// `|û(ξ)|²` summed over components.
    pub fn power(&self, i: usize) -> f64 {
        self.hat[0][i].norm_sqr() + self.hat[1][i].norm_sqr()
    }

    /// `Σ_ξ w(|ξ|²)|û|² / L²`, the discrete Plancherel pairing.
    pub fn weighted_energy(&self, w: impl Fn(f64) -> f64) -> f64 {
        let l2 = self.grid.side_length * self.grid.side_length;
        (0..self.grid.len()).map(|i| w(self.xi2(i)) * self.power(i)).sum::<f64>() / l2
    }
}

/// Low and high parts of the splitting `‖û‖ ≤ ‖φ̌û‖ + ‖(1−φ̌)û‖` with `φ̌ = e^{−|ξ|²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEnergy {
    pub total: f64,
    pub low: f64,
    pub high: f64,
}

impl SplitEnergy {
    /// `total − (√low + √high)²`, nonpositive when the decomposition holds.
    pub fn triangle_excess(&self) -> f64 {
        let s = self.low.sqrt() + self.high.sqrt();
        self.total - s * s
    }
}

pub fn fourier_split(f: &FourierField) -> SplitEnergy {
    SplitEnergy {
        total: f.weighted_energy(|_| 1.0),
        low: f.weighted_energy(|x| (-2.0 * x).exp()),
        high: f.weighted_energy(|x| {
            let d = 1.0 - (-x).exp();
            d * d
        }),
    }
}

/// `Z(t) = (1+t)^α` with `G² = α/(2b_s(1+t))`, so that `Z' = 2b_s Z G²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingSchedule {
    pub alpha: f64,
    pub b_s: f64,
}

pub fn splitting_schedule(alpha: f64, b_s: f64) -> SplittingSchedule {
    SplittingSchedule { alpha, b_s }
}

impl SplittingSchedule {
    pub fn z(&self, t: f64) -> f64 {
        (1.0 + t).powf(self.alpha)
    }

    pub fn z_prime(&self, t: f64) -> f64 {
        self.alpha * (1.0 + t).powf(self.alpha - 1.0)
    }

    pub fn g2(&self, t: f64) -> f64 {
        self.alpha / (2.0 * self.b_s * (1.0 + t))
    }

    /// `Z' − 2b_s Z G²`.
    pub fn ode_residual(&self, t: f64) -> f64 {
        self.z_prime(t) - 2.0 * self.b_s * self.z(t) * self.g2(t)
    }
}

/// `g²(t) = 1/((e+t) log(e+t))`, used for the logarithmic rate.
pub fn log_schedule_g2(t: f64) -> f64 {
    1.0 / ((E + t) * (E + t).ln())
}

/// `exp(2∫₀ᵗ g²)` by adaptive quadrature; equals `log²(e+t)`.
pub fn log_schedule_weight(t: f64) -> f64 {
    let i = if t > 0.0 { adaptive_simpson(&log_schedule_g2, 0.0, t, 1e-13) } else { 0.0 };
    (2.0 * i).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Fft2;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_split_ratio() {
        let g = Grid::new(2.0 * PI, 16, 2).unwrap();
        let fft = Fft2::new(16);
        let u = [(0..g.len()).map(|i| (2.0 * g.point(i).0).cos()).collect(), vec![0.0; g.len()]];
        let f = FourierField::new(&g, &fft, &u);
        let s = fourier_split(&f);
        let x: f64 = 4.0;
        assert!((s.low / s.total - (-2.0 * x).exp()).abs() < 1e-14);
        assert!((s.high / s.total - (1.0 - (-x).exp()).powi(2)).abs() < 1e-14);
        assert!(s.triangle_excess() <= 1e-14);
        let phys: f64 = u[0].iter().map(|v| v * v).sum::<f64>() * g.cell_area();
        assert!((phys - s.total).abs() < 1e-12 * phys);
    }

    #[test]
    fn zero_frequency_is_all_low() {
        let g = Grid::new(2.0 * PI, 8, 1).unwrap();
        let fft = Fft2::new(8);
        let u = [vec![1.5; g.len()], vec![0.0; g.len()]];
        let s = fourier_split(&FourierField::new(&g, &fft, &u));
        assert!((s.low - s.total).abs() < 1e-12);
        assert!(s.high.abs() < 1e-24);
    }

    #[test]
    fn schedule_identity() {
        let s = splitting_schedule(2.0, 1.0);
        assert_eq!(s.z(0.0), 1.0);
        assert_eq!(s.z_prime(0.0), 2.0);
        assert_eq!(s.g2(0.0), 1.0);
        assert_eq!(s.ode_residual(0.0), 0.0);
        for a in [0.5, 1.0, 3.7] {
            let s = splitting_schedule(a, 2.5);
            assert_eq!(s.z(0.0), 1.0);
            for t in [0.0, 0.3, 10.0, 1e3] {
                assert!(s.ode_residual(t).abs() <= 1e-14 * s.z_prime(t).abs().max(1.0));
            }
        }
    }

    #[test]
    fn log_schedule_weight_is_log_squared() {
        for t in [0.0, 0.5, 3.0, 40.0, 500.0] {
            let want = (E + t).ln().powi(2);
            assert!((log_schedule_weight(t) - want).abs() < 1e-8 * want);
        }
    }
}
