//! Eigenbasis coordinates and the diagonal operator calculus on them.

use crate::basis::{max_generalized_eigenvalue, ConstrainedBasis};
use crate::error::{Error, Result};
use crate::report::{AuditReport, Condition};
use crate::scalar::{lit, norm2, to_f64, Real};
use crate::velocity::VelocityField;
use nalgebra::{DMatrix, DVector};

/// Velocity field as coordinates in the eigenbasis `w_1 … w_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState<T: Real> {
    pub coeffs: DVector<T>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Low,
    High,
}

impl<T: Real> SpectralState<T> {
    pub fn new(coeffs: DVector<T>) -> Self {
        SpectralState { coeffs, time: 0.0 }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DVector::zeros(dim))
    }

    pub fn at(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `|u|_b = (Σ c_k²)^{1/2}`.
    pub fn norm_h(&self) -> T {
        norm2(&self.coeffs)
    }
}

/// `(Σ λ_k c_k²)^{1/2}` for eigenvalues `lam`.
pub fn energy_norm<T: Real>(lam: &DVector<T>, c: &DVector<T>) -> T {
    lam.iter().zip(c.iter()).fold(T::zero(), |a, (&l, &x)| a + l * x * x).sqrt()
}

impl<T: Real> ConstrainedBasis<T> {
    /// `(Σ λ_k c_k²)^{1/2} = stress_form(u,u)^{1/2}`.
    pub fn norm_v(&self, s: &SpectralState<T>) -> T {
        energy_norm(&self.eigenvalues, &s.coeffs)
    }

    /// `h1_seminorm_b(u)^{1/2}` evaluated through the stored Gram matrix.
    pub fn norm_h1(&self, s: &SpectralState<T>) -> T {
        (s.coeffs.dot(&(&self.h1_eigen * &s.coeffs))).max(T::zero()).sqrt()
    }

    fn check_dim(&self, s: &SpectralState<T>) -> Result<()> {
        if s.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: s.dim(), max: self.dim() })
        }
    }

    pub fn project(&self, s: &SpectralState<T>, n: usize, part: Part) -> Result<SpectralState<T>> {
        self.check_dim(s)?;
        if n > self.dim() {
            return Err(Error::IndexOutOfRange { index: n, max: self.dim() });
        }
        let mut out = s.clone();
        let range = match part {
            Part::Low => n..self.dim(),
            Part::High => 0..n,
        };
        for k in range {
            out.coeffs[k] = T::zero();
        }
        Ok(out)
    }

    /// `e^{−At}`, exact in the eigenbasis.
    pub fn semigroup_apply(&self, s: &SpectralState<T>, t: f64) -> Result<SpectralState<T>> {
        self.check_dim(s)?;
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let tt = lit::<T>(t);
        let mut out = s.clone();
        for (c, &l) in out.coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= (-l * tt).exp();
        }
        Ok(out)
    }

    pub fn apply_a(&self, s: &SpectralState<T>) -> Result<SpectralState<T>> {
        self.check_dim(s)?;
        Ok(SpectralState { coeffs: s.coeffs.component_mul(&self.eigenvalues), time: s.time })
    }

    pub fn apply_a_inverse(&self, s: &SpectralState<T>) -> Result<SpectralState<T>> {
        self.check_dim(s)?;
        if let Some(&l) = self.eigenvalues.iter().find(|&&l| l <= T::zero()) {
            return Err(Error::SingularOperator(to_f64(l)));
        }
        Ok(SpectralState { coeffs: s.coeffs.component_div(&self.eigenvalues), time: s.time })
    }

    pub fn to_velocity(&self, s: &SpectralState<T>) -> VelocityField<T> {
        self.velocity(&s.coeffs)
    }

    /// Orthogonal projection of an arbitrary field onto the space.
    pub fn from_velocity(&self, u: &VelocityField<T>) -> Result<SpectralState<T>> {
        if u.grid != self.fields.grid {
            return Err(Error::GridMismatch);
        }
        Ok(SpectralState::new(self.project_field(&u.u)))
    }

    /// Restriction of `h1_eigen` to the index range.
    fn h1_block(&self, r: std::ops::Range<usize>) -> DMatrix<T> {
        self.h1_eigen.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }
}

/// Operator norm `H → V` of `e^{−At}Q_n` against its closed-form bound.
///
/// Samples `t ∈ factors / λ_{n+1}`. The primary condition uses the energy norm;
/// the `h1` variant is informational.
pub fn semigroup_bound_audit<T: Real>(basis: &ConstrainedBasis<T>, n: usize, factors: &[f64]) -> Result<AuditReport> {
    let d = basis.dim();
    if n >= d {
        return Err(Error::IndexOutOfRange { index: n, max: d - 1 });
    }
    let f = &basis.fields;
    let (bbar, nui) = (to_f64(f.b_bar), to_f64(f.nu_i));
    let lam: Vec<f64> = basis.eigenvalues.iter().map(|&l| to_f64(l)).collect();
    let ln1 = lam[n];
    let mut rep = AuditReport::new(format!("semigroup bound, n = {n}"));
    for &fac in factors {
        let t = fac / ln1;
        let bound = bbar.powf(-0.5) * ((nui * t).powf(-0.5) + ln1.sqrt()) * (-ln1 * t).exp();
        let measured = lam[n..].iter().map(|&l| l.sqrt() * (-l * t).exp()).fold(0.0, f64::max);
        rep.push(Condition::le(format!("|e^(-At) Q_n|_(H->V), t = {fac}/lambda_(n+1)"), measured, bound));
        // e^{−λ_{n+1}t} is factored out; modes with negligible relative weight are dropped,
        // since the eigensolver breaks down on blocks of near-denormal entries.
        let rel: Vec<f64> = lam[n..].iter().map(|&l| (-(l - ln1) * t).exp()).take_while(|&v| v >= 1e-12).collect();
        let e = DMatrix::from_diagonal(&DVector::from_iterator(rel.len(), rel.iter().map(|&v| lit::<T>(v))));
        let k = basis.h1_block(n..n + rel.len());
        let (ev, _) = T::symmetric_eigen(&e * k * &e);
        let h1 = to_f64(ev.iter().fold(T::zero(), |a, &v| a.max(v))).sqrt() * (-ln1 * t).exp();
        rep.push(Condition::le(format!("h1 variant, t = {fac}/lambda_(n+1)"), h1, bound).info());
    }
    Ok(rep)
}

/// Norms of `(I+τA)P_n` on `V` and of the embedding `P_nH → P_nV`.
pub fn resolvent_bounds_audit<T: Real>(basis: &ConstrainedBasis<T>, n: usize, tau: f64) -> Result<AuditReport> {
    let d = basis.dim();
    if n == 0 || n >= d {
        return Err(Error::IndexOutOfRange { index: n, max: d - 1 });
    }
    let f = &basis.fields;
    let (bbar, nui) = (to_f64(f.b_bar), to_f64(f.nu_i));
    let lam: Vec<f64> = basis.eigenvalues.iter().map(|&l| to_f64(l)).collect();
    let ln = lam[n - 1];
    let mut rep = AuditReport::new(format!("resolvent bounds, n = {n}, tau = {tau}"));

    let measured = lam[..n].iter().map(|&l| 1.0 + tau * l).fold(0.0, f64::max);
    rep.push(Condition::le("|(I+tau A)P_n|_V", measured, (tau * ln).exp()));
    let k = basis.h1_block(0..n);
    let dd = DMatrix::from_diagonal(&DVector::from_iterator(n, lam[..n].iter().map(|&l| lit::<T>(1.0 + tau * l))));
    let h1 = to_f64(max_generalized_eigenvalue(&(&dd * &k * &dd), &k)?).sqrt();
    rep.push(Condition::le("|(I+tau A)P_n|_V h1 variant", h1, (tau * ln).exp()).info());

    let bound = (bbar * nui / ln).powf(-0.5);
    rep.push(Condition::le("|P_n H -> P_n V|", ln.sqrt(), bound));
    let (ev, _) = T::symmetric_eigen(k);
    let h1 = to_f64(ev.iter().fold(T::zero(), |a, &v| a.max(v))).sqrt();
    rep.push(Condition::le("|P_n H -> P_n V| h1 variant", h1, bound).info());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::fields::{sample_fields, FieldSpec};
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn basis() -> ConstrainedBasis<f64> {
        let g = Grid::new(2.0 * PI, 16, 2).unwrap();
        build_basis(&sample_fields(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap()).unwrap()
    }

    #[test]
    fn projections_and_semigroup() {
        let b = basis();
        let s = SpectralState::new(DVector::from_fn(b.dim(), |i, _| (i as f64 + 1.0).sin()));
        let d = b.dim();
        assert_eq!(b.project(&s, d, Part::Low).unwrap(), s);
        assert_eq!(b.project(&s, 0, Part::High).unwrap(), s);
        assert!(b.project(&s, d + 1, Part::Low).is_err());
        let lo = b.project(&s, 5, Part::Low).unwrap();
        let hi = b.project(&s, 5, Part::High).unwrap();
        assert!((lo.norm_h().powi(2) + hi.norm_h().powi(2) - s.norm_h().powi(2)).abs() < 1e-12);
        assert!((b.norm_v(&lo).powi(2) + b.norm_v(&hi).powi(2) - b.norm_v(&s).powi(2)).abs() < 1e-12);
        let mut one = SpectralState::zeros(d);
        one.coeffs[6] = 1.0;
        let e = b.semigroup_apply(&one, 1.0 / b.eigenvalues[6]).unwrap();
        assert!((e.coeffs[6] - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(b.semigroup_apply(&one, -1.0), Err(Error::NegativeTime(_))));
        let back = b.apply_a_inverse(&b.apply_a(&s).unwrap()).unwrap();
        assert!((back.coeffs - &s.coeffs).amax() < 1e-12);
    }

    #[test]
    fn constant_case_bounds_hold() {
        let b = basis();
        assert!(resolvent_bounds_audit(&b, 4, 0.1).unwrap().all_pass());
        assert!(semigroup_bound_audit(&b, 4, &[0.01, 0.1, 1.0]).unwrap().all_pass());
        let r = resolvent_bounds_audit(&b, 4, 1e-12).unwrap();
        assert!((r.conditions[0].measured - 1.0).abs() < 1e-10);
    }
}
