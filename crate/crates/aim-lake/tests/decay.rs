use aim_lake::basis::build_basis;
use aim_lake::decay::*;
use aim_lake::dynamics::{random_state_h, rng_for, LakeModel};
use aim_lake::fields::{sample_fields, FieldSource, FieldSpec};
use aim_lake::forcing::ForcingModel;
use aim_lake::grid::Grid;
use aim_lake::state::SpectralState;
use nalgebra::DVector;
use std::f64::consts::PI;
use std::sync::Arc;

fn model(side: f64, b: &str, eta: f64, forcing: ForcingModel) -> LakeModel<f64> {
    let g = Grid::new(side, 32, 6).unwrap();
    let spec = FieldSpec { b: FieldSource::expr(b).unwrap(), nu: FieldSource::constant(0.1), eta: FieldSource::constant(eta) };
    let f = sample_fields(&g, &spec).unwrap();
    LakeModel::new(Arc::new(build_basis(&f).unwrap()), forcing).unwrap()
}

fn start(m: &LakeModel<f64>, r: f64) -> SpectralState<f64> {
    random_state_h(&m.basis.eigenvalues, r, &mut rng_for(11, 0))
}

fn opts(horizon: f64) -> DecayOptions {
    DecayOptions { horizon, dt: 0.01, record_every: 5, ..Default::default() }
}

#[test]
fn unforced_variable_depth_ledgers() {
    let m = model(2.0 * PI, "1 + 0.3*sin(2*pi*x/L)", 0.0, ForcingModel::Zero);
    let (r, _) = decay_study(&m, &start(&m, 0.5), &opts(20.0)).unwrap();
    println!("{:#?}", r.audit(1e-6));
    assert!(residual_ok(&r.strong, 1e-6));
    assert!(r.identity_gap < 1e-8);
    assert!(r.energy_monotone);
    assert!(r.max_triangle_excess <= 1e-10);
    assert!(r.max_plancherel_gap <= 1e-10);
    assert_eq!(r.log_law.envelope_violations, 0);
}

#[test]
fn integrable_and_derivative_forcing_ledgers() {
    for f in [ForcingModel::IntegrableL1 { wavevector: [1, 1], amplitude: 0.5 }, ForcingModel::DerivativeForm { kappa: 0.05, width: 0.8 }] {
        let m = model(2.0 * PI, "1 + 0.3*sin(2*pi*x/L)", 0.02, f.clone());
        let (r, _) = decay_study(&m, &start(&m, 0.1), &opts(20.0)).unwrap();
        println!("{f:?}\n{:#?}", r.audit(1e-6));
        assert!(residual_ok(&r.strong, 1e-6), "{f:?}");
        assert!(r.identity_gap < 1e-8);
    }
}

#[test]
fn gaussian_mollifier_single_mode_closed_form() {
    let m = model(2.0 * PI, "1", 0.0, ForcingModel::Zero);
    let k = m.basis.eigenvalues.len();
    let mut c = DVector::zeros(k);
    c[0] = 0.7;
    let rec = aim_lake::dynamics::integrate(&m, &SpectralState::new(c), &aim_lake::dynamics::IntegrateOptions::new(0.01, 0.05), None).unwrap();
    let led = build_energy_ledger(&m, &rec, &[Mollifier::Gaussian], false).unwrap();
    // The lowest modes have |ξ|² = 1 on the 2π box.
    for (i, t) in led.terms[0].iter().enumerate() {
        assert!((t[0] - (-2.0f64).exp() * led.l2[i]).abs() < 1e-10 * led.l2[i]);
        assert!((t[2] - (-2.0f64).exp() * led.grad2[i]).abs() < 1e-10 * led.grad2[i]);
    }
}

#[test]
fn lp_lq_contraction_and_decay() {
    let m = model(2.0 * PI, "1", 0.0, ForcingModel::Zero);
    let init = vec![concentrated_state(&m.basis, 0.3), start(&m, 1.0).coeffs];
    let a2 = lp_lq_audit(&m, 2.0, &[0.01, 0.1, 1.0, 10.0], &init);
    assert!(a2.constant <= 0.5 + 1e-12, "{a2:?}");
    let a1 = lp_lq_audit(&m, 1.0, &[0.01, 0.1, 1.0], &init);
    println!("{a1:?}");
    assert!(a1.constant.is_finite() && a1.constant > 0.0);
}
