use std::sync::Arc;

use proptest::prelude::*;
use ymlab::flow::*;
use ymlab::{EquivariantConnection, Error, GastelParams};

fn dirichlet_gastel(n: usize, rho_max: f64) -> SolverCfg {
    let p = GastelParams::new(n).unwrap();
    let mut cfg = SolverCfg::new(n);
    cfg.boundary = Boundary::Dirichlet(Arc::new(move |t| gastel_eta(&p, rho_max, t)));
    cfg
}

#[test]
fn state_validation() {
    assert!(FlowState::new(vec![0.0, 0.1], vec![0.0, 0.0], -1.0).is_err());
    let rho = FlowState::grid(0.1, 2.0).unwrap();
    assert_eq!(rho.len(), 21);
    assert!(FlowState::new(rho.clone(), vec![0.0; 20], -1.0).is_err());
    let mut eta = vec![0.0; 21];
    eta[3] = f64::NAN;
    assert!(FlowState::new(rho, eta, -1.0).is_err());
    assert!(FlowState::grid(0.0, 1.0).is_err());
    assert!(FlowState::gastel(5, 0.1, 5.0, 0.5).is_err());
}

#[test]
fn solver_config_validation() {
    assert!(SolverCfg::new(5).validate().is_ok());
    assert!(SolverCfg { cfl: 0.3, ..SolverCfg::new(5) }.validate().is_err());
    assert!(SolverCfg { order: 3, ..SolverCfg::new(5) }.validate().is_err());
    assert!(matches!(SolverCfg::new(10).validate(), Err(Error::UnsupportedDimension(10))));
    let s = FlowState::gastel(5, 0.1, 5.0, -1.0).unwrap();
    assert!(step_with(&s, &SolverCfg::new(5), 0.01, 0.0).is_err());
}

#[test]
fn constant_states_are_stationary() {
    for c in [0.0, 1.0, 2.0] {
        let s = FlowState::from_fn(0.1, 5.0, 0.0, |_| c).unwrap();
        let cfg = SolverCfg { pin_origin: false, ..SolverCfg::new(6) };
        let mut cur = s.clone();
        for _ in 0..50 {
            cur = step(&cur, &cfg).unwrap();
        }
        assert!(cur.eta.iter().all(|v| *v == c), "eta = {c}");
    }
}

#[test]
fn sample_times_are_geometric_in_minus_t() {
    let ts = sample_times(-1.0, -0.01, 3);
    assert_eq!(ts[0], -1.0);
    assert!((ts[1] + 0.1).abs() < 1e-15 && (ts[2] + 0.01).abs() < 1e-15);
    let us = sample_times(0.0, 1.0, 5);
    assert_eq!(us, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn run_rejects_bad_sample_times() {
    let s = FlowState::gastel(5, 0.1, 5.0, -1.0).unwrap();
    let cfg = SolverCfg::new(5);
    assert!(run(s.clone(), &cfg, &[-0.5, -0.6], |_| {}).is_err());
    assert!(run(s, &cfg, &[-2.0], |_| {}).is_err());
}

#[test]
fn run_lands_on_sample_times() {
    let s = FlowState::gastel(5, 0.1, 10.0, -1.0).unwrap();
    let ts = sample_times(-1.0, -0.5, 4);
    let mut seen = 0;
    let tr = run(s, &SolverCfg::new(5), &ts, |_| seen += 1).unwrap();
    assert_eq!(tr.times(), ts);
    assert_eq!(seen, 4);
    assert!(tr.completed());
}

#[test]
fn self_similar_run_converges_at_second_order() {
    let p = GastelParams::new(5).unwrap();
    let rho_max = 20.0;
    let cfg = dirichlet_gastel(5, rho_max);
    let errs: Vec<f64> = [0.04, 0.02]
        .iter()
        .map(|&dr| {
            let s = FlowState::gastel(5, dr, rho_max, -1.0).unwrap();
            let tr = run(s, &cfg, &[-0.5, -0.25], |_| {}).unwrap();
            tracking_error(tr.states.last().unwrap(), rho_max / 2.0, |r, t| gastel_eta(&p, r, t))
        })
        .collect();
    assert!(errs[1] < 1e-3);
    let order = (errs[0] / errs[1]).log2();
    assert!((1.8..2.2).contains(&order), "order {order}");
}

#[test]
fn curvature_grows_at_the_self_similar_rate() {
    let s = FlowState::gastel(5, 0.02, 20.0, -1.0).unwrap();
    let ts = sample_times(-1.0, -0.1, 4);
    let tr = run(s, &SolverCfg::new(5), &ts, |_| {}).unwrap();
    let base = tr.states[0].sup_f(5);
    for st in &tr.states {
        let scaled = st.sup_f(5) * (-st.t);
        assert!((scaled / base - 1.0).abs() < 0.1, "t = {}: {scaled}", st.t);
    }
}

#[test]
fn grid_curvature_matches_closed_form() {
    let s = FlowState::gastel(6, 0.01, 10.0, -1.0).unwrap();
    let conn = EquivariantConnection::gastel(6).unwrap();
    let grid = curvature_norm_sq_grid(&s, 6);
    for (k, &r) in s.rho.iter().enumerate().take(s.rho.len() - 1) {
        let exact = conn.curvature_norm_sq(r);
        assert!((grid[k] - exact).abs() <= 1e-3 * exact.max(1.0), "r = {r}");
    }
}

#[test]
fn steep_data_triggers_a_blowup_event() {
    let s = FlowState::gastel(5, 0.02, 10.0, -1.0).unwrap();
    let cfg = SolverCfg { blowup_threshold: 5.0, ..SolverCfg::new(5) };
    let tr = run(s, &cfg, &sample_times(-1.0, -1e-3, 8), |_| {}).unwrap();
    assert!(!tr.completed());
    assert!(matches!(tr.events[0], FlowEvent::Blowup { t, .. } if t < 0.0));
    assert!(tr.states.len() < 8);
}

#[test]
fn harness_needs_ten_samples() {
    let s = FlowState::gastel(5, 0.1, 10.0, -1.0).unwrap();
    let tr = run(s, &SolverCfg::new(5), &sample_times(-1.0, -0.5, 4), |_| {}).unwrap();
    assert!(entropy_monotonicity_harness(&tr, None, &HarnessCfg::default()).is_err());
}

#[test]
fn fixed_basepoint_functionals_decrease_along_perturbed_flow() {
    let p = GastelParams::new(5).unwrap();
    let s = FlowState::from_fn(0.04, 20.0, -1.0, |r| 1.05 * gastel_eta(&p, r, -1.0)).unwrap();
    let ts = sample_times(-1.0, -0.25, 10);
    let cfg = SolverCfg::new(5);
    let tr = run(s.clone(), &cfg, &ts, |_| {}).unwrap();
    let coarse = FlowState::from_fn(0.08, 20.0, -1.0, |r| 1.05 * gastel_eta(&p, r, -1.0)).unwrap();
    let shadow = run(coarse, &cfg, &ts, |_| {}).unwrap();
    let hcfg = HarnessCfg { with_entropy: false, ..HarnessCfg::default() };
    let rep = entropy_monotonicity_harness(&tr, Some(&shadow), &hcfg).unwrap();
    assert!(rep.entropy.is_none());
    assert_eq!(rep.fixed.len(), 6);
    assert!(rep.passed(), "{:?}", rep.fixed.iter().map(|f| &f.violations).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_is_a_fixed_point(n in 5usize..=9, dr in 0.05f64..0.2) {
        let s = FlowState::from_fn(dr, 4.0, -1.0, |_| 0.0).unwrap();
        let next = step(&s, &SolverCfg::new(n)).unwrap();
        prop_assert!(next.eta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gastel_eta_is_self_similar(lambda in 0.2f64..5.0, rho in 0.0f64..10.0, t in -4.0f64..-0.1) {
        let p = GastelParams::new(7).unwrap();
        let a = gastel_eta(&p, lambda * rho, lambda * lambda * t);
        let b = gastel_eta(&p, rho, t);
        prop_assert!((a - b).abs() <= 1e-13);
    }
}
