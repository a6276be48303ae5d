use crate::basis::ConstrainedBasis;
use crate::error::Result;
use crate::forcing::ForcingModel;
use crate::scalar::{lit, to_f64, Real};
use crate::state::{energy_norm, SpectralState};
use crate::velocity::advect;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A finite-dimensional system `c' + Λc + B(c) + Ec = f(t)` with diagonal `Λ`.
pub trait GalerkinModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn eigenvalues(&self) -> &DVector<T>;
    /// Coordinates of `B(u,u)`.
    fn advection(&self, c: &DVector<T>) -> DVector<T>;
    /// Coordinates of the friction term `ηu`.
    fn friction(&self, c: &DVector<T>) -> DVector<T>;
    fn forcing(&self, t: f64) -> DVector<T>;

    fn norm_v(&self, c: &DVector<T>) -> T {
        energy_norm(self.eigenvalues(), c)
    }
}

/// `θ(s) = 1 − χ(s−1)` with `χ` the clamped cubic smoothstep.
pub fn theta(s: f64) -> f64 {
    let t = (s - 1.0).clamp(0.0, 1.0);
    1.0 - t * t * (3.0 - 2.0 * t)
}

/// Cutoff of the nonlinearity outside the V-ball of radius `rho1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedNonlinearity {
    pub rho1: f64,
}

impl PreparedNonlinearity {
    pub fn new(rho1: f64) -> Self {
        PreparedNonlinearity { rho1 }
    }

    /// `θ(‖u‖_V²/ρ₁²)` for the given V-norm.
    pub fn factor(&self, norm_v: f64) -> f64 {
        theta(norm_v * norm_v / (self.rho1 * self.rho1))
    }
}

/// `B_θ(c)` for any model.
pub fn advection_theta<T: Real, M: GalerkinModel<T> + ?Sized>(
    model: &M,
    c: &DVector<T>,
    prep: Option<&PreparedNonlinearity>,
) -> DVector<T> {
    match prep {
        None => model.advection(c),
        Some(p) => {
            let th = p.factor(to_f64(model.norm_v(c)));
            if th == 0.0 {
                DVector::zeros(c.len())
            } else if th == 1.0 {
                model.advection(c)
            } else {
                model.advection(c) * lit::<T>(th)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Friction<T: Real> {
    Scalar(T),
    Matrix(DMatrix<T>),
}

/// The lake equations projected onto a [`ConstrainedBasis`].
#[derive(Debug, Clone)]
pub struct LakeModel<T: Real> {
    pub basis: Arc<ConstrainedBasis<T>>,
    pub forcing_model: ForcingModel,
    pub forcing_coords: DVector<T>,
    friction: Friction<T>,
    /// When false the advection term is dropped.
    pub nonlinear: bool,
}

impl<T: Real> LakeModel<T> {
    pub fn new(basis: Arc<ConstrainedBasis<T>>, forcing: ForcingModel) -> Result<Self> {
        forcing.validate(&basis.fields.grid, basis.dim())?;
        let eta = &basis.fields.eta;
        let first = eta[0];
        let friction = if eta.iter().all(|&v| v == first) {
            Friction::Scalar(first)
        } else {
            Friction::Matrix(basis.weighted_mass(eta))
        };
        let forcing_coords = forcing.coords(&basis);
        Ok(LakeModel { basis, forcing_model: forcing, forcing_coords, friction, nonlinear: true })
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// `E = (∫ bη w_i·w_j)` in eigencoordinates.
    pub fn friction_matrix(&self) -> DMatrix<T> {
        match &self.friction {
            Friction::Scalar(e) => DMatrix::identity(self.dim(), self.dim()) * *e,
            Friction::Matrix(m) => m.clone(),
        }
    }

    /// Eigencoordinates of the projection of `u·∇u`, regardless of `nonlinear`.
    pub fn rhs_b(&self, s: &SpectralState<T>) -> SpectralState<T> {
        SpectralState { coeffs: self.bilinear(&s.coeffs), time: s.time }
    }

    pub fn rhs_b_theta(&self, s: &SpectralState<T>, prep: &PreparedNonlinearity) -> SpectralState<T> {
        let th = prep.factor(to_f64(self.basis.norm_v(s)));
        SpectralState { coeffs: self.bilinear(&s.coeffs) * lit::<T>(th), time: s.time }
    }

    fn bilinear(&self, c: &DVector<T>) -> DVector<T> {
        if c.iter().all(|v| *v == T::zero()) {
            return DVector::zeros(c.len());
        }
        let u = self.basis.velocity(c);
        let g = u.grad.as_ref().expect("synthesized velocity has a gradient");
        let n = advect(&u, g);
        self.basis.project_field(&n)
    }

    /// `∫ bη|u|²`.
    pub fn friction_work(&self, c: &DVector<T>) -> T {
        c.dot(&self.friction(c))
    }
}

impl<T: Real> GalerkinModel<T> for LakeModel<T> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn eigenvalues(&self) -> &DVector<T> {
        &self.basis.eigenvalues
    }

    fn advection(&self, c: &DVector<T>) -> DVector<T> {
        if self.nonlinear {
            self.bilinear(c)
        } else {
            DVector::zeros(c.len())
        }
    }

    fn friction(&self, c: &DVector<T>) -> DVector<T> {
        match &self.friction {
            Friction::Scalar(e) => c * *e,
            Friction::Matrix(m) => m * c,
        }
    }

    fn forcing(&self, t: f64) -> DVector<T> {
        &self.forcing_coords * lit::<T>(self.forcing_model.time_factor(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_profile() {
        assert_eq!(theta(0.3), 1.0);
        assert_eq!(theta(1.0), 1.0);
        assert_eq!(theta(2.0), 0.0);
        assert_eq!(theta(7.0), 0.0);
        assert!((theta(1.5) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for s in [1.0, 2.0] {
            let d = (theta(s + h) - theta(s - h)) / (2.0 * h);
            assert!(d.abs() < 1e-5, "C1 at {s}");
        }
    }
}
