use aim_lake::basis::build_basis;
use aim_lake::dynamics::*;
use aim_lake::fields::{sample_fields, FieldSource, FieldSpec};
use aim_lake::forcing::ForcingModel;
use aim_lake::grid::Grid;
use aim_lake::state::SpectralState;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn model(b: &str, eta: f64, forcing: ForcingModel) -> LakeModel<f64> {
    let g = Grid::new(2.0 * PI, 32, 4).unwrap();
    let spec = FieldSpec { b: FieldSource::expr(b).unwrap(), nu: FieldSource::constant(0.1), eta: FieldSource::constant(eta) };
    LakeModel::new(Arc::new(build_basis(&sample_fields(&g, &spec).unwrap()).unwrap()), forcing).unwrap()
}

#[test]
fn linear_unforced_flow_is_exact() {
    let m = model("2 + sin(x)", 0.0, ForcingModel::Zero).linear();
    let u0 = random_state_h(&m.basis.eigenvalues, 1.0, &mut rng_for(3, 0));
    let t = 0.7;
    let u = advance(&m, &u0, 0.05, 14, None).unwrap();
    for k in 0..m.dim() {
        let want = u0.coeffs[k] * (-m.basis.eigenvalues[k] * t).exp();
        assert!((u.coeffs[k] - want).abs() < 1e-13, "mode {k}");
    }
}

#[test]
fn second_order_self_convergence() {
    let m = model("2 + sin(x)", 0.0, ForcingModel::SteadyLowMode { wavevector: [1, 1], amplitude: 0.5 });
    let u0 = random_state_h(&m.basis.eigenvalues, 1.0, &mut rng_for(5, 0));
    let sc = self_convergence(&m, &u0, 0.02, 1.0).unwrap();
    assert!((3.6..=4.4).contains(&sc.ratio), "{sc:?}");
}

#[test]
fn energy_law_with_friction_extrapolates_to_zero() {
    let m = model("1 + 0.3*sin(x)", 0.05, ForcingModel::Zero);
    let u0 = random_state_h(&m.basis.eigenvalues, 1.0, &mut rng_for(9, 0));
    let r1 = energy_law_residual(&m, &u0, 0.01, 1.0).unwrap();
    let r2 = energy_law_residual(&m, &u0, 0.005, 1.0).unwrap();
    assert!(richardson(r1, r2, 2).abs() < 1e-6, "{r1} {r2}");
}

#[test]
fn richardson_removes_the_leading_term() {
    let r = |h: f64| 3.0 * h * h;
    assert!(richardson(r(0.1), r(0.05), 2).abs() < 1e-15);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("2 + sin(x)", 0.0, ForcingModel::Zero);
    let s = random_state_h(&m.basis.eigenvalues, 1.0, &mut rng_for(1, 0)).at(2.5);
    let p = dir.path().join("s.bin");
    write_checkpoint(&p, &s, &m.basis.hash).unwrap();
    let (back, hash) = read_checkpoint::<f64>(&p).unwrap();
    assert_eq!(back, s);
    assert_eq!(hash, m.basis.hash);
}

#[test]
fn cutoff_profile() {
    assert_eq!(theta(0.0), 1.0);
    assert_eq!(theta(1.0), 1.0);
    assert_eq!(theta(2.0), 0.0);
    assert_eq!(theta(7.0), 0.0);
    let p = PreparedNonlinearity::new(2.0);
    assert_eq!(p.factor(1.0), 1.0);
    assert_eq!(p.factor(4.0), 0.0);
}

#[test]
fn ledger_rows_match_norms() {
    let m = model("2 + sin(x)", 0.0, ForcingModel::Zero);
    let u0 = random_state_h(&m.basis.eigenvalues, 0.8, &mut rng_for(2, 0));
    let rec = integrate(&m, &u0, &IntegrateOptions::new(0.01, 0.2).every(5), None).unwrap();
    assert_eq!(rec.len(), 5);
    assert!((rec.ledger[0].norm_h - 0.8).abs() < 1e-14);
    for (row, s) in rec.ledger.iter().zip(&rec.states) {
        assert!((row.norm_v - m.norm_v(&s.coeffs)).abs() < 1e-14);
        assert!((row.dissipation - row.norm_v * row.norm_v).abs() < 1e-12 * row.dissipation.max(1.0));
    }
    assert!(rec.to_csv().starts_with("time,normH,normV"));
}

#[test]
fn nonpositive_step_is_rejected() {
    let m = model("1", 0.0, ForcingModel::Zero);
    let u0 = SpectralState::zeros(m.dim());
    assert!(integrate(&m, &u0, &IntegrateOptions::new(0.0, 1.0), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unforced_energy_never_increases(seed in 0u64..1000, radius in 0.1f64..3.0) {
        let m = model("1 + 0.3*sin(x)", 0.02, ForcingModel::Zero);
        let u0 = random_state_h(&m.basis.eigenvalues, radius, &mut rng_for(seed, 0));
        let rec = integrate(&m, &u0, &IntegrateOptions::new(0.01, 1.0).every(5), None).unwrap();
        for w in rec.ledger.windows(2) {
            prop_assert!(w[1].norm_h <= w[0].norm_h * (1.0 + 1e-12));
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories(seed in 0u64..1000) {
        let m = model("2 + sin(x)", 0.0, ForcingModel::SteadyLowMode { wavevector: [2, 1], amplitude: 1.0 });
        let run = || {
            let u0 = random_state_h(&m.basis.eigenvalues, 1.0, &mut rng_for(seed, 0));
            advance(&m, &u0, 0.01, 20, None).unwrap()
        };
        prop_assert_eq!(run(), run());
    }
}
