mod common;

use masa_core::market_data::{rolling_covariance, synth_generate, CovarianceEstimate, OhlcvSeries, ReturnsMatrix};
use masa_core::metrics::{
    annual_return, long_term_volatility, max_drawdown, strategy_risk, wilcoxon_rank_sum, RankSumMethod, RiskForm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn days(count: usize) -> Vec<chrono::NaiveDate> {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..count as u64).map(|d| start + chrono::Days::new(d)).collect()
}

fn random_curve(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut c = vec![100.0];
    for _ in 1..len {
        let last = *c.last().unwrap();
        c.push(last * (1.0 + 0.02 * common::normal(rng)).max(0.01));
    }
    c
}

#[test]
fn drawdown_matches_all_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let c = random_curve(&mut rng, 200);
        assert!((max_drawdown(&c) - common::mdd_all_pairs(&c)).abs() < 1e-12);
    }
    assert_eq!(max_drawdown(&[100.0, 50.0, 75.0]), 0.5);
    assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
}

#[test]
fn exact_rank_sum_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 40 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let tie_heavy = rng.random_bool(0.4);
        let draw = |rng: &mut ChaCha8Rng| {
            if tie_heavy {
                rng.random_range(0..4) as f64
            } else {
                common::normal(rng)
            }
        };
        let a: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
        let Ok(t) = wilcoxon_rank_sum(&a, &b, 0.05) else {
            continue;
        };
        assert_eq!(t.method, RankSumMethod::Exact);
        assert!((t.p_value - common::rank_sum_enumeration(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
        checked += 1;
    }
    let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], 0.05).unwrap();
    assert!((t.p_value - 0.1).abs() < 1e-12);
}

#[test]
fn large_samples_use_normal_approximation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a: Vec<f64> = (0..30).map(|_| common::normal(&mut rng)).collect();
    let b: Vec<f64> = (0..30).map(|_| common::normal(&mut rng) + 2.0).collect();
    let t = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
    assert_eq!(t.method, RankSumMethod::NormalApprox);
    assert!(t.significant);
    let same = wilcoxon_rank_sum(&a, &a, 0.05).unwrap();
    assert!(same.p_value >= 0.05 && !same.significant);
}

#[test]
fn covariance_matches_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 3;
    let t_days = 40;
    let closes: Vec<f64> = {
        let mut c = vec![100.0; n];
        for d in 1..t_days {
            for i in 0..n {
                let prev = c[(d - 1) * n + i];
                c.push(prev * (1.0 + 0.01 * common::normal(&mut rng)));
            }
        }
        c
    };
    let series = OhlcvSeries::from_closes(vec!["A".into(), "B".into(), "C".into()], days(t_days), closes.clone()).unwrap();
    let returns = ReturnsMatrix::from_series(&series);
    let k = 10;
    for t in k + 1..=t_days - 1 {
        let rows: Vec<Vec<f64>> = (t - k..t)
            .map(|d| (0..n).map(|i| closes[d * n + i] / closes[(d - 1) * n + i] - 1.0).collect())
            .collect();
        let want = common::two_pass_covariance(&rows);
        let got = rolling_covariance(&returns, t, k).unwrap();
        for (a, b) in got.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn covariance_ignores_future_rows() {
    let spec = common::two_regime_spec();
    let s = synth_generate(&spec, 1).unwrap();
    let base = rolling_covariance(&ReturnsMatrix::from_series(&s), 100, 21).unwrap();
    let mut closes = s.closes().to_vec();
    let n = s.n_assets();
    for v in &mut closes[100 * n..] {
        *v *= 3.0;
    }
    let perturbed = OhlcvSeries::from_closes(s.asset_ids().to_vec(), s.dates().to_vec(), closes).unwrap();
    let again = rolling_covariance(&ReturnsMatrix::from_series(&perturbed), 100, 21).unwrap();
    assert_eq!(base.as_slice(), again.as_slice());
}

#[test]
fn risk_matches_matrix_vector_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let cov = common::random_psd(&mut rng, 3, 0.1);
        let w = common::random_simplex(&mut rng, 3);
        let c = CovarianceEstimate::from_matrix(3, cov.clone()).unwrap();
        let got = strategy_risk(&w, &c, RiskForm::NormOfProduct).unwrap();
        assert!((got - common::norm_of_product(&cov, &w)).abs() < 1e-12);
    }
}

#[test]
fn annualization_hand_cases() {
    let ar = annual_return(&[100.0, 101.0, 102.01], 252).unwrap();
    assert!((ar - (1.0201f64.powi(126) - 1.0)).abs() < 1e-9);
    let v = long_term_volatility(&[0.01, -0.01], 252).unwrap();
    assert!((v - (126.0f64 * 0.0002).sqrt()).abs() < 1e-12);
}
