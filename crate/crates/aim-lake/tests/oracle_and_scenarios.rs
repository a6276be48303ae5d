use aim_lake::basis::build_basis;
use aim_lake::fields::{sample_fields, FieldSource, FieldSpec};
use aim_lake::grid::Grid;
use aim_lake::oracle::*;
use aim_lake::pipeline::{eigenvalue_fit, prepare};
use aim_lake::scenario::ModelScenario;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_loads_and_validates() {
    let mut count = 0;
    for e in std::fs::read_dir(scenario_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let s = ModelScenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert_eq!(s.hash.len(), 64);
            assert!(s.grid().unwrap().m() >= 4 * s.grid.modes + 2);
            count += 1;
        }
    }
    assert!(count >= 8);
}

#[test]
fn scenario_hash_tracks_the_text() {
    let p = scenario_dir().join("constant.toml");
    let text = std::fs::read_to_string(&p).unwrap();
    let a = ModelScenario::parse(&text, p.parent().unwrap()).unwrap();
    let b = ModelScenario::parse(&format!("{text}\n# edited\n"), p.parent().unwrap()).unwrap();
    assert_ne!(a.hash, b.hash);
}

#[test]
fn constant_scenario_first_eigenvalue_is_two() {
    let s = ModelScenario::load(&scenario_dir().join("constant.toml")).unwrap();
    let p = prepare(&s, None).unwrap();
    assert!((p.basis.eigenvalues[0] - 2.0).abs() < 1e-12);
    assert!(eigenvalue_fit(&p.basis).slope > 0.0);
}

#[test]
fn gamma_constant_is_root_pi() {
    assert!((gamma_quadrature() - PI.sqrt()).abs() < 1e-8);
}

#[test]
fn dense_and_spectral_semigroups_agree() {
    let g = Grid::new(2.0 * PI, 16, 3).unwrap();
    let spec = FieldSpec { b: FieldSource::expr("2 + sin(x)").unwrap(), nu: FieldSource::constant(0.3), eta: FieldSource::constant(0.0) };
    let b = build_basis(&sample_fields(&g, &spec).unwrap()).unwrap();
    for t in [0.0, 0.01, 0.3, 2.0] {
        let dense = dense_semigroup(&b.stiffness, &b.gram, t).unwrap();
        let spectral = spectral_semigroup_matrix(&b, t);
        assert!((dense - spectral).amax() < 1e-10, "t = {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simpson_integrates_cubics_exactly(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, hi in 0.1f64..3.0) {
        let f = |x: f64| a * x * x * x + b * x + c;
        let exact = a * hi.powi(4) / 4.0 + b * hi * hi / 2.0 + c * hi;
        prop_assert!((adaptive_simpson(&f, 0.0, hi, 1e-12) - exact).abs() < 1e-10);
    }

    #[test]
    fn truncated_gamma_is_monotone(s in 1.0f64..30.0) {
        prop_assert!(gamma_truncated(s) <= gamma_truncated(s + 1.0));
        prop_assert!(gamma_truncated(s) <= PI.sqrt() + 1e-12);
    }
}
