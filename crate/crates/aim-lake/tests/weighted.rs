use aim_lake::basis::{build_basis, ConstrainedBasis};
use aim_lake::fields::{sample_fields, FieldSource, FieldSpec};
use aim_lake::grid::Grid;
use aim_lake::oracle::{constant_coefficient_spectrum, quadrature_trilinear_eigen};
use aim_lake::stream::weighted_divergence_residual;
use aim_lake::velocity::{h1_seminorm_b, inner_b, stress_form, trilinear_b};
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn variable() -> &'static ConstrainedBasis<f64> {
    static B: OnceLock<ConstrainedBasis<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let g = Grid::new(2.0 * PI, 32, 4).unwrap();
        let spec = FieldSpec {
            b: FieldSource::expr("1.5 + 0.5*cos(x)*sin(y)").unwrap(),
            nu: FieldSource::expr("0.2 + 0.05*sin(x + y)").unwrap(),
            eta: FieldSource::constant(0.0),
        };
        build_basis(&sample_fields(&g, &spec).unwrap()).unwrap()
    })
}

fn constant() -> &'static ConstrainedBasis<f64> {
    static B: OnceLock<ConstrainedBasis<f64>> = OnceLock::new();
    B.get_or_init(|| {
        let g = Grid::new(4.0, 16, 3).unwrap();
        build_basis(&sample_fields(&g, &FieldSpec::constant(2.0, 0.5, 0.0)).unwrap()).unwrap()
    })
}

fn coeffs(basis: &ConstrainedBasis<f64>) -> impl Strategy<Value = DVector<f64>> {
    let d = basis.dim();
    prop::collection::vec(-1.0f64..1.0, d).prop_map(DVector::from_vec)
}

#[test]
fn constant_spectrum_on_a_non_2pi_box() {
    let b = constant();
    let want = constant_coefficient_spectrum(&b.fields.grid, 0.5);
    assert_eq!(want.len(), b.dim());
    for (a, w) in b.eigenvalues.iter().zip(&want) {
        assert!(((a - w) / w).abs() < 1e-10, "{a} vs {w}");
    }
}

#[test]
fn basis_residuals_within_tolerance() {
    for b in [variable(), constant()] {
        assert!(b.max_orthonormality_defect() <= 1e-10);
        assert!(b.max_eigen_residual() <= 1e-9);
        assert!(b.eigenvalues[0] > 0.0);
    }
}

#[test]
fn spectral_gap_boundaries_are_strict() {
    let b = variable();
    for n in b.cluster_boundaries() {
        assert!(!b.gap_is_zero(n));
        assert!(b.eigenvalues[n] > b.eigenvalues[n - 1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn basis_is_orthonormal_in_the_weighted_product(c in coeffs(variable())) {
        let b = variable();
        let u = b.velocity(&c);
        let h = inner_b(&b.fields, &u, &u).unwrap();
        prop_assert!((h - c.norm_squared()).abs() <= 1e-10 * c.norm_squared().max(1.0));
        let lam: f64 = c.iter().zip(b.eigenvalues.iter()).map(|(x, l)| l * x * x).sum();
        let s = stress_form(&b.fields, &u, &u).unwrap();
        prop_assert!((s - lam).abs() <= 1e-9 * lam.max(1.0));
    }

    #[test]
    fn weighted_forms_are_symmetric(c1 in coeffs(variable()), c2 in coeffs(variable())) {
        let b = variable();
        let (u, v) = (b.velocity(&c1), b.velocity(&c2));
        let f = &b.fields;
        let scale = (inner_b(f, &u, &u).unwrap() * inner_b(f, &v, &v).unwrap()).sqrt();
        prop_assert!((inner_b(f, &u, &v).unwrap() - inner_b(f, &v, &u).unwrap()).abs() <= 1e-12 * scale);
        let ss = (stress_form(f, &u, &u).unwrap() * stress_form(f, &v, &v).unwrap()).sqrt();
        prop_assert!((stress_form(f, &u, &v).unwrap() - stress_form(f, &v, &u).unwrap()).abs() <= 1e-12 * ss);
    }

    #[test]
    fn constrained_fields_are_weighted_divergence_free(c in coeffs(variable())) {
        let b = variable();
        prop_assert!(weighted_divergence_residual(&b.velocity(&c), &b.fields).unwrap() <= 1e-10);
    }

    #[test]
    fn coercivity_holds(c in coeffs(variable())) {
        let b = variable();
        let u = b.velocity(&c);
        let f = &b.fields;
        prop_assert!(stress_form(f, &u, &u).unwrap() >= f.b_bar * f.nu_i * h1_seminorm_b(f, &u).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn trilinear_is_skew_for_constant_depth(c1 in coeffs(constant()), c2 in coeffs(constant())) {
        let b = constant();
        let (u, v) = (b.velocity(&c1), b.velocity(&c2));
        let t = trilinear_b(&b.fields, &u, &v, &v).unwrap();
        let anti = trilinear_b(&b.fields, &u, &v, &u).unwrap() + trilinear_b(&b.fields, &u, &u, &v).unwrap();
        prop_assert!(t.abs() <= 1e-11 * (1.0 + c1.norm() * c2.norm() * c2.norm()));
        prop_assert!(anti.abs() <= 1e-11 * (1.0 + c1.norm().powi(2) * c2.norm()));
    }

    #[test]
    fn trilinear_matches_oversampled_quadrature(c1 in coeffs(constant()), c2 in coeffs(constant()), c3 in coeffs(constant())) {
        let b = constant();
        let fast = trilinear_b(&b.fields, &b.velocity(&c1), &b.velocity(&c2), &b.velocity(&c3)).unwrap();
        let slow = quadrature_trilinear_eigen(b, &c1, &c2, &c3, 3).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-9 * (1.0 + c1.norm() * c2.norm() * c3.norm()));
    }

    #[test]
    fn projection_inverts_velocity(c in coeffs(variable())) {
        let b = variable();
        let back = b.project_field(&b.velocity(&c).u);
        prop_assert!((back - &c).norm() <= 1e-10 * c.norm().max(1.0));
    }
}
