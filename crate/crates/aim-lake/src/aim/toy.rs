use crate::dynamics::GalerkinModel;
use crate::scalar::{lit, Real};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Two-mode system with an energy-neutral quadratic coupling
/// `B(y,z) = (−βz² − γyz, βyz + γy²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub f1: f64,
    pub f2: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams { lambda1: 1.0, lambda2: 50.0, eta: 0.0, beta: 0.02, gamma: 1.0, f1: 0.0, f2: 5.0 }
    }
}

impl ToyParams {
    /// The high-mode balance `λ₂z + ηz + βyz + γy² = f₂` solved exactly.
    pub fn closed_form_slave(&self, y: f64) -> f64 {
        (self.f2 - self.gamma * y * y) / (self.lambda2 + self.eta + self.beta * y)
    }
}

#[derive(Debug, Clone)]
pub struct TwoModeToy<T: Real> {
    pub params: ToyParams,
    lam: DVector<T>,
}

impl<T: Real> TwoModeToy<T> {
    pub fn new(params: ToyParams) -> Self {
        TwoModeToy { lam: DVector::from_vec(vec![lit(params.lambda1), lit(params.lambda2)]), params }
    }

    pub fn without_coupling(mut self) -> Self {
        self.params.beta = 0.0;
        self.params.gamma = 0.0;
        self
    }
}

impl<T: Real> GalerkinModel<T> for TwoModeToy<T> {
    fn dim(&self) -> usize {
        2
    }

    fn eigenvalues(&self) -> &DVector<T> {
        &self.lam
    }

    fn advection(&self, c: &DVector<T>) -> DVector<T> {
        let (y, z) = (c[0], c[1]);
        let (b, g) = (lit::<T>(self.params.beta), lit::<T>(self.params.gamma));
        DVector::from_vec(vec![-b * z * z - g * y * z, b * y * z + g * y * y])
    }

    fn friction(&self, c: &DVector<T>) -> DVector<T> {
        c * lit::<T>(self.params.eta)
    }

    fn forcing(&self, _t: f64) -> DVector<T> {
        DVector::from_vec(vec![lit(self.params.f1), lit(self.params.f2)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_is_energy_neutral() {
        let m = TwoModeToy::<f64>::new(ToyParams::default());
        for (y, z) in [(0.3, -1.2), (2.0, 0.7), (-1.5, 4.0)] {
            let c = DVector::from_vec(vec![y, z]);
            assert!(c.dot(&m.advection(&c)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_balances() {
        let p = ToyParams::default();
        let m = TwoModeToy::<f64>::new(p);
        for y in [-1.0, 0.0, 0.5] {
            let z = p.closed_form_slave(y);
            let c = DVector::from_vec(vec![y, z]);
            let r = p.lambda2 * z + m.friction(&c)[1] + m.advection(&c)[1] - p.f2;
            assert!(r.abs() < 1e-12);
        }
    }
}
