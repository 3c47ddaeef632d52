mod common;

use masa_core::metrics::WeightVector;
use masa_core::rl::{episode_reward, jensen_shannon, per_step_reward, RewardConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..8).prop_filter_map("positive mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn jsd_is_bounded_and_symmetric((p, q) in weights().prop_flat_map(|p| {
        let n = p.len();
        (Just(p), prop::collection::vec(0.0f64..1.0, n))
    })) {
        let s: f64 = q.iter().sum();
        prop_assume!(s > 1e-6);
        let q: Vec<f64> = q.iter().map(|x| x / s).collect();
        let pw = WeightVector::new(p.clone()).unwrap();
        let qw = WeightVector::new(q.clone()).unwrap();
        let d = jensen_shannon(&pw, &qw);
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&d));
        prop_assert!((d - jensen_shannon(&qw, &pw)).abs() < 1e-15);
        prop_assert!((d - common::jsd_oracle(&p, &q)).abs() < 1e-12);
        prop_assert_eq!(jensen_shannon(&pw, &pw), 0.0);
    }
}

#[test]
fn disjoint_supports_reach_ln2() {
    let p = WeightVector::vertex(2, 0);
    let q = WeightVector::vertex(2, 1);
    assert!((jensen_shannon(&p, &q) - std::f64::consts::LN_2).abs() < 1e-12);
    let cfg = RewardConfig {
        lambda1: 1.0,
        lambda2: 1.0,
    };
    let r = per_step_reward(1.0, &p, &q, &cfg).unwrap();
    assert!((r + std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn episode_matches_step_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = RewardConfig::default();
    for _ in 0..50 {
        let t = rng.random_range(1..60);
        let n = rng.random_range(2..6);
        let mut growths = Vec::new();
        let mut jsd = Vec::new();
        let mut steps = 0.0;
        for _ in 0..t {
            let g = 1.0 + 0.02 * common::normal(&mut rng);
            let a = WeightVector::new(common::random_simplex(&mut rng, n)).unwrap();
            let b = WeightVector::new(common::random_simplex(&mut rng, n)).unwrap();
            steps += per_step_reward(g, &a, &b, &cfg).unwrap();
            growths.push(g);
            jsd.push(jensen_shannon(&a, &b));
        }
        let e = episode_reward(&growths, &jsd, 1.0, &cfg).unwrap();
        assert!((e.j - steps / t as f64).abs() < 1e-10);
        assert!((e.j - (cfg.lambda1 * e.j_r + cfg.lambda2 * e.j_js)).abs() < 1e-12);
    }
}

#[test]
fn two_day_hand_case() {
    let cfg = RewardConfig {
        lambda1: 1.0,
        lambda2: 0.1,
    };
    let e = episode_reward(&[1.1, 0.9], &[0.0, 0.0], 1.0, &cfg).unwrap();
    assert!((e.j - 0.5 * (1.1f64.ln() + 0.9f64.ln())).abs() < 1e-15);
    assert!((e.j + 0.005034).abs() < 1e-5);
}
