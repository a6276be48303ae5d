//! Velocity fields on the grid and the weighted forms acting on them.

use crate::error::{Error, Result};
use crate::fields::CoefficientFields;
use crate::grid::{spectral_gradient, Grid};
use crate::scalar::{lit, Real};

/// `grad[i][j]` holds `∂_j u_i`.
pub type Gradient<T> = [[Vec<T>; 2]; 2];

/// Two-component field sampled on a grid.
#[derive(Debug, Clone)]
pub struct VelocityField<T: Real> {
    pub grid: Grid,
    pub u: [Vec<T>; 2],
    /// Exact gradient when the field was synthesized from a stream function.
    pub grad: Option<Box<Gradient<T>>>,
    /// Set when `∇·(b u) = 0` holds by construction.
    pub constrained: bool,
}

impl<T: Real> VelocityField<T> {
    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![T::zero(); grid.len()];
        VelocityField { grid: *grid, u: [z.clone(), z], grad: None, constrained: false }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut u = [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
        for i in 0..grid.len() {
            let (x, y) = grid.point(i);
            let v = f(x, y);
            u[0].push(lit(v[0]));
            u[1].push(lit(v[1]));
        }
        VelocityField { grid: *grid, u, grad: None, constrained: false }
    }

    /// Gradient, spectral unless an exact one is attached.
    pub fn gradient(&self, fields: &CoefficientFields<T>) -> Gradient<T> {
        if let Some(g) = &self.grad {
            return (**g).clone();
        }
        let [a, b] = spectral_gradient(&self.grid, &fields.fft, &self.u[0]);
        let [c, d] = spectral_gradient(&self.grid, &fields.fft, &self.u[1]);
        [[a, b], [c, d]]
    }

    pub fn scaled(mut self, s: T) -> Self {
        for c in self.u.iter_mut() {
            c.iter_mut().for_each(|v| *v *= s);
        }
        if let Some(g) = self.grad.as_mut() {
            for row in g.iter_mut() {
                for c in row.iter_mut() {
                    c.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        self
    }
}

fn check<T: Real>(fields: &CoefficientFields<T>, fs: &[&VelocityField<T>]) -> Result<()> {
    if fs.iter().all(|f| f.grid == fields.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn weighted_sum<T: Real>(grid: &Grid, f: impl Fn(usize) -> T) -> T {
    let mut s = T::zero();
    for i in 0..grid.len() {
        s += f(i);
    }
    s * lit(grid.cell_area())
}

/// `(u, v)_b = ∫ b u·v`.
pub fn inner_b<T: Real>(fields: &CoefficientFields<T>, u: &VelocityField<T>, v: &VelocityField<T>) -> Result<T> {
    check(fields, &[u, v])?;
    Ok(weighted_sum(&fields.grid, |i| fields.b[i] * (u.u[0][i] * v.u[0][i] + u.u[1][i] * v.u[1][i])))
}

/// `‖u‖_b² = ∫ b |∇u|²`.
pub fn h1_seminorm_b<T: Real>(fields: &CoefficientFields<T>, u: &VelocityField<T>) -> Result<T> {
    check(fields, &[u])?;
    let g = u.gradient(fields);
    Ok(weighted_sum(&fields.grid, |i| {
        let mut s = T::zero();
        for row in &g {
            for c in row {
                s += c[i] * c[i];
            }
        }
        fields.b[i] * s
    }))
}

/// Traceless symmetric stress components `(σ11, σ12)`, with `σ22 = -σ11`.
pub(crate) fn stress_components<T: Real>(g: &Gradient<T>, i: usize) -> (T, T) {
    (g[0][0][i] - g[1][1][i], g[0][1][i] + g[1][0][i])
}

/// `∫ bν (∇u+∇uᵀ−I∇·u):(∇v+∇vᵀ−I∇·v)`.
pub fn stress_form<T: Real>(fields: &CoefficientFields<T>, u: &VelocityField<T>, v: &VelocityField<T>) -> Result<T> {
    check(fields, &[u, v])?;
    let gu = u.gradient(fields);
    let gv = v.gradient(fields);
    let two = lit::<T>(2.0);
    Ok(weighted_sum(&fields.grid, |i| {
        let (a1, a2) = stress_components(&gu, i);
        let (b1, b2) = stress_components(&gv, i);
        two * fields.b[i] * fields.nu[i] * (a1 * b1 + a2 * b2)
    }))
}

/// Pointwise `u·∇w`.
pub fn advect<T: Real>(u: &VelocityField<T>, gw: &Gradient<T>) -> [Vec<T>; 2] {
    let n = u.grid.len();
    let mut out = [vec![T::zero(); n], vec![T::zero(); n]];
    for i in 0..n {
        for c in 0..2 {
            out[c][i] = u.u[0][i] * gw[c][0][i] + u.u[1][i] * gw[c][1][i];
        }
    }
    out
}

/// `∫ b (u·∇w)·v`.
pub fn trilinear_b<T: Real>(
    fields: &CoefficientFields<T>,
    u: &VelocityField<T>,
    w: &VelocityField<T>,
    v: &VelocityField<T>,
) -> Result<T> {
    check(fields, &[u, w, v])?;
    let a = advect(u, &w.gradient(fields));
    Ok(weighted_sum(&fields.grid, |i| fields.b[i] * (a[0][i] * v.u[0][i] + a[1][i] * v.u[1][i])))
}

/// Unweighted `‖u‖₂²`.
pub fn l2_squared<T: Real>(u: &VelocityField<T>) -> T {
    weighted_sum(&u.grid, |i| u.u[0][i] * u.u[0][i] + u.u[1][i] * u.u[1][i])
}

/// Unweighted `‖u‖_q^q` of the pointwise magnitude.
pub fn lq_power<T: Real>(u: &VelocityField<T>, q: f64) -> T {
    let qq = lit::<T>(q);
    weighted_sum(&u.grid, |i| (u.u[0][i] * u.u[0][i] + u.u[1][i] * u.u[1][i]).sqrt().powf(qq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_fields, FieldSpec};
    use std::f64::consts::PI;

    fn unit_fields() -> CoefficientFields<f64> {
        let g = Grid::new(2.0 * PI, 16, 2).unwrap();
        sample_fields(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap()
    }

    #[test]
    fn closed_form_integrals() {
        let f = unit_fields();
        let u = VelocityField::from_fn(&f.grid, |x, _| [x.sin(), 0.0]);
        assert!((inner_b(&f, &u, &u).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((h1_seminorm_b(&f, &u).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        let zero = VelocityField::zeros(&f.grid);
        assert_eq!(inner_b(&f, &zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_has_no_stress() {
        let f = unit_fields();
        let c = VelocityField::from_fn(&f.grid, |_, _| [0.3, -1.2]);
        let v = VelocityField::from_fn(&f.grid, |x, y| [(x + y).sin(), x.cos()]);
        assert!(stress_form(&f, &c, &v).unwrap().abs() < 1e-12);
        assert!(h1_seminorm_b(&f, &c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let f = unit_fields();
        let other = Grid::new(2.0 * PI, 32, 2).unwrap();
        let u = VelocityField::<f64>::zeros(&other);
        assert!(matches!(inner_b(&f, &u, &u), Err(Error::GridMismatch)));
    }
}
