mod common;

use masa_core::solver::{differential_evolution, BoundaryMode, DeConfig, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn diagonal_case_concentrates_on_quiet_asset() {
    let cov = [0.04, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.0001];
    let cfg = SolverConfig {
        mu: 0.0,
        ..SolverConfig::default()
    };
    let r = common::solve(&[0.4, 0.3, 0.3], &cov, 0.0, &cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let best = common::brute_force_min_risk(&mut rng, &cov, 3, 1_000_000);
    assert!(r.achieved_risk <= best * 1.05, "{} vs {best}", r.achieved_risk);
    assert!(r.a_final.as_slice()[2] > 0.9);
}

#[test]
fn control_never_raises_risk() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig {
        budget: 600,
        ..SolverConfig::default()
    };
    for i in 0..40 {
        let n = rng.random_range(2..=10);
        let cov = common::random_psd(&mut rng, n, 0.02);
        let a = common::random_simplex(&mut rng, n);
        let before = common::norm_of_product(&cov, &a);
        let r = common::solve(&a, &cov, 0.0, &cfg, i);
        assert!(r.achieved_risk <= before + 1e-15);
        let sum: f64 = r.a_ctrl.iter().sum();
        assert!(sum.abs() < 1e-9);
    }
}

#[test]
fn boundary_already_met_means_no_control() {
    let cov = [0.04, 0.0, 0.0, 0.01];
    let a = [0.5, 0.5];
    let risk = common::norm_of_product(&cov, &a);
    let r = common::solve(&a, &cov, risk, &SolverConfig::default(), 0);
    assert_eq!(r.a_ctrl, vec![0.0, 0.0]);
    assert!(r.feasible);
}

#[test]
fn hard_mode_stays_close_when_feasible() {
    let cov = [0.04, 0.0, 0.0, 0.0001];
    let a = [0.6, 0.4];
    let target = 0.5 * common::norm_of_product(&cov, &a);
    let cfg = SolverConfig {
        mode: BoundaryMode::Hard,
        ..SolverConfig::default()
    };
    let r = common::solve(&a, &cov, target, &cfg, 4);
    assert!(r.feasible);
    // the closest feasible point puts 0.04 w0 = target on the first asset
    let w0 = (target.powi(2) - 0.0001f64.powi(2)).sqrt() / 0.04;
    assert!(r.a_final.as_slice()[0] <= 0.6);
    assert!((r.a_final.as_slice()[0] - w0).abs() < 0.02);
}

#[test]
fn larger_budget_never_worse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cov = common::random_psd(&mut rng, 5, 0.05);
    let a = common::random_simplex(&mut rng, 5);
    let base = common::norm_of_product(&cov, &a);
    let objective = |w: &[f64]| {
        let d: f64 = w.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        common::norm_of_product(&cov, w) / base + 0.1 * d
    };
    for seed in 0..5 {
        let mut last = f64::INFINITY;
        for budget in [100, 400, 1600] {
            let cfg = SolverConfig {
                budget,
                ..SolverConfig::default()
            };
            let r = common::solve(&a, &cov, 0.0, &cfg, seed);
            let v = objective(r.a_final.as_slice());
            assert!(v <= last + 1e-15);
            last = v;
        }
    }
}

#[test]
fn de_finds_one_dimensional_quadratic_minimum() {
    // f(w) = 3 (w0 - 0.2)^2 + (w1 - 0.5)^2 on w0 + w1 = 1; minimum at w0 = 0.275
    let f = |w: &[f64]| 3.0 * (w[0] - 0.2).powi(2) + (w[1] - 0.5).powi(2);
    let exact = f(&[0.275, 0.725]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let r = differential_evolution(f, 2, 5000, &DeConfig::default(), &mut rng).unwrap();
    assert!((r.value - exact).abs() < 1e-4);
    assert!(r.trace.windows(2).all(|p| p[1] <= p[0]));

    let mut again = ChaCha8Rng::seed_from_u64(6);
    let r2 = differential_evolution(f, 2, 5000, &DeConfig::default(), &mut again).unwrap();
    assert_eq!(r.trace, r2.trace);
}
