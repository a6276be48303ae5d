use aim_lake::aim::*;
use aim_lake::basis::build_basis;
use aim_lake::dynamics::{AbsorbingEstimates, GalerkinModel, LakeModel};
use aim_lake::error::Error;
use aim_lake::fields::{sample_fields, FieldSpec};
use aim_lake::forcing::ForcingModel;
use aim_lake::grid::Grid;
use aim_lake::oracle::toy_slave_manifold;
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn linear_model(index: usize, eta: f64) -> Arc<LakeModel<f64>> {
    let g = Grid::new(2.0 * PI, 16, 2).unwrap();
    let f = sample_fields(&g, &FieldSpec::constant(1.0, 1.0, eta)).unwrap();
    let b = Arc::new(build_basis(&f).unwrap());
    Arc::new(LakeModel::new(b, ForcingModel::Eigenmode { index, amplitude: 3.0 }).unwrap().linear())
}

fn low(d: usize, vals: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    for (i, x) in vals.iter().enumerate() {
        v[i] = *x;
    }
    v
}

#[test]
fn level_zero_is_exactly_zero() {
    let m = linear_model(6, 0.0);
    let phis = build_phi_sequence(m.clone(), AimConfig::new(4, 2, 0.05)).unwrap();
    let y = low(m.dim(), &[0.3, -0.1, 0.2, 0.5]);
    assert!(phis[0].eval(&y).unwrap().iter().all(|v| *v == 0.0));
    assert!(phis[0].parent().is_none());
    assert_eq!(phis[2].parent().unwrap().level, 1);
}

#[test]
fn backward_sequence_single_mode_is_geometric() {
    let g = Grid::new(2.0 * PI, 16, 2).unwrap();
    let f = sample_fields(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap();
    let b = Arc::new(build_basis(&f).unwrap());
    let m = Arc::new(LakeModel::new(b, ForcingModel::Zero).unwrap().linear());
    let lam = m.eigenvalues().clone();
    let phis = build_phi_sequence(m.clone(), AimConfig::new(4, 3, 0.01)).unwrap();
    let y0 = low(m.dim(), &[0.0, 0.7]);
    let (ys, zs) = backward_euler_sequence(&phis[0], &y0, 0.01, 3).unwrap();
    assert_eq!(ys.len(), 4);
    for (k, y) in ys.iter().enumerate() {
        let want = (1.0 + 0.01 * lam[1]).powi(k as i32) * 0.7;
        assert!((y[1] - want).abs() < 1e-14);
        assert_eq!(y[0], 0.0);
        assert!(zs[k].iter().all(|v| *v == 0.0));
    }
    let (ys, _) = backward_euler_sequence(&phis[0], &y0, 0.01, 0).unwrap();
    assert_eq!(ys, vec![y0]);
}

#[test]
fn unforced_linear_map_vanishes() {
    let g = Grid::new(2.0 * PI, 16, 2).unwrap();
    let f = sample_fields(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap();
    let b = Arc::new(build_basis(&f).unwrap());
    let m = Arc::new(LakeModel::new(b, ForcingModel::Zero).unwrap().linear());
    let phis = build_phi_sequence(m.clone(), AimConfig::new(4, 3, 0.05)).unwrap();
    let y = low(m.dim(), &[1.0, 0.5, -0.5, 0.2]);
    for p in &phis {
        assert!(p.eval(&y).unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn linear_slave_mode_and_window_ratio() {
    let n = 4;
    let m = linear_model(n + 1, 0.0);
    let lam = m.eigenvalues().clone();
    let tau = 0.05;
    let phis = build_phi_sequence(m.clone(), AimConfig::new(n, 4, tau)).unwrap();
    let exact = 3.0 / lam[n];
    for y in [low(m.dim(), &[0.0]), low(m.dim(), &[0.4, -0.3, 0.1, 0.9])] {
        for phi in phis.iter().skip(1) {
            let parts = phi.eval_parts(&y).unwrap();
            let total = parts.total();
            assert!((total[n] - exact).abs() < 1e-12 * exact);
            assert!(total.iter().enumerate().all(|(i, v)| i == n || v.abs() < 1e-14));
            let dev = (exact - parts.window[n]) / exact;
            let want = (-lam[n] * tau * phi.level as f64).exp();
            assert!((dev / want - 1.0).abs() < 0.1, "level {}: {dev} vs {want}", phi.level);
        }
    }
}

#[test]
fn literal_prefactor_differs_but_stays_finite() {
    let n = 4;
    let m = linear_model(n + 1, 0.0);
    let mut cfg = AimConfig::new(n, 3, 0.05);
    cfg.paper_literal = true;
    let phis = build_phi_sequence(m.clone(), cfg).unwrap();
    let v = phis[3].eval(&low(m.dim(), &[0.1])).unwrap();
    assert!(v[n].is_finite());
    assert!((v[n] - 3.0 / m.eigenvalues()[n]).abs() > 1e-6);
}

#[test]
fn budget_is_enforced() {
    let m = linear_model(6, 0.0);
    let mut cfg = AimConfig::new(4, 3, 0.05);
    cfg.budget = Some(2);
    cfg.memo_quantum = None;
    let phis = build_phi_sequence(m.clone(), cfg).unwrap();
    let r = phis[3].eval(&low(m.dim(), &[0.1, 0.2]));
    assert!(matches!(r, Err(Error::BudgetExceeded(2))));
}

#[test]
fn backward_blow_up_is_reported() {
    let m = linear_model(6, 0.0);
    let mut cfg = AimConfig::new(4, 3, 50.0);
    cfg.rho1 = Some(1e-3);
    let phis = build_phi_sequence(m.clone(), cfg).unwrap();
    let r = phis[3].eval(&low(m.dim(), &[1.0]));
    assert!(matches!(r, Err(Error::BackwardBlowUp { .. })), "{r:?}");
}

fn toy_grid() -> Vec<f64> {
    (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect()
}

#[test]
fn toy_matches_slave_manifold_oracle() {
    let p = ToyParams::default();
    let toy: Arc<dyn GalerkinModel<f64>> = Arc::new(TwoModeToy::<f64>::new(p));
    let mut cfg = AimConfig::new(1, 4, 1e-12);
    cfg.memo_quantum = None;
    let phis = build_phi_sequence(toy, cfg).unwrap();
    let ys = toy_grid();
    let oracle = toy_slave_manifold(&p, &ys, 1e-12).unwrap();
    let gaps: Vec<f64> = phis
        .iter()
        .map(|phi| ys.iter().zip(&oracle.z).map(|(&y, &z)| (phi.eval(&low(2, &[y])).unwrap()[1] - z).abs()).fold(0.0, f64::max))
        .collect();
    for w in gaps[..4].windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
    assert!(gaps[4] <= 10.0 * oracle.tolerance, "{gaps:?}");
}

#[test]
fn toy_finite_window_gap_scales_with_window() {
    let p = ToyParams::default();
    let toy: Arc<dyn GalerkinModel<f64>> = Arc::new(TwoModeToy::<f64>::new(p));
    let ys = toy_grid();
    let gap = |tau: f64| {
        let mut cfg = AimConfig::new(1, 4, tau);
        cfg.memo_quantum = None;
        let phis = build_phi_sequence(toy.clone(), cfg).unwrap();
        ys.iter().map(|&y| (phis[4].eval(&low(2, &[y])).unwrap()[1] - p.closed_form_slave(y)).abs()).fold(0.0, f64::max)
    };
    let (a, b) = (gap(1e-3), gap(5e-4));
    assert!(a > 1e-9);
    assert!((a / b - 2.0).abs() < 0.3, "{a} {b}");
}

#[test]
fn unforced_linear_toy_audit_is_trivial() {
    let p = ToyParams { f2: 0.0, ..ToyParams::default() };
    let toy: Arc<dyn GalerkinModel<f64>> = Arc::new(TwoModeToy::<f64>::new(p).without_coupling());
    let phis = build_phi_sequence(toy.clone(), AimConfig::new(1, 3, 0.01)).unwrap();
    let est = AbsorbingEstimates {
        rho0: 1.0,
        rho1: 1.0,
        t0: 0.0,
        m0: 0.0,
        m0_p99: 0.0,
        m1: 0.0,
        m1_p99: 0.0,
        beta1: 0.0,
        beta2: 0.0,
        alpha: f64::INFINITY,
        empirical: true,
    };
    let c = aim_constants(toy.eigenvalues(), 1.0, 1.0, 0.0, 0.0, &est, 1, &ConstantOverrides::default()).unwrap();
    let (r, levels) = audit_existence(&phis, &c, 20, 1.0, 3).unwrap();
    assert!(levels.iter().all(|l| l.sup_norm == 0.0 && l.lipschitz == 0.0));
    assert!(r.conditions.iter().filter(|c| c.name.starts_with("Lip") || c.name.starts_with("sup")).all(|c| c.pass));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_live_on_high_modes(y in prop::collection::vec(-1.0f64..1.0, 4), level in 1usize..4) {
        let m = linear_model(7, 0.0);
        let phis = build_phi_sequence(m.clone(), AimConfig::new(4, 3, 0.05)).unwrap();
        let v = phis[level].eval(&low(m.dim(), &y)).unwrap();
        prop_assert!(v.iter().take(4).all(|x| *x == 0.0));
    }

    #[test]
    fn toy_levels_are_memo_consistent(y in -2.0f64..2.0) {
        let toy: Arc<dyn GalerkinModel<f64>> = Arc::new(TwoModeToy::<f64>::new(ToyParams::default()));
        let phis = build_phi_sequence(toy, AimConfig::new(1, 3, 0.01)).unwrap();
        let a = phis[3].eval(&low(2, &[y])).unwrap();
        let b = phis[3].eval(&low(2, &[y])).unwrap();
        prop_assert_eq!(a, b);
    }
}
