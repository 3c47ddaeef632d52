use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::WeightVector;

/// Weights of the return and action-diversity reward terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.1,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1.is_finite() && self.lambda1 > 0.0) {
            return Err(Error::InvalidConfig("reward.lambda1 must be positive".into()));
        }
        if !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return Err(Error::InvalidConfig("reward.lambda2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReward {
    pub j: f64,
    pub j_r: f64,
    pub j_js: f64,
}

/// Jensen-Shannon divergence in nats, with `0 log 0 = 0`.
///
/// # Panics
/// When the two vectors have different lengths.
pub fn jensen_shannon(p: &WeightVector, q: &WeightVector) -> f64 {
    assert_eq!(p.len(), q.len(), "jensen_shannon on vectors of different length");
    let mut total = 0.0;
    for (&a, &b) in p.as_slice().iter().zip(q.as_slice()) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    total.clamp(0.0, std::f64::consts::LN_2)
}

/// Episodic objective: `J_r = (log C0 + Σ log r_t) / T`, `J_JS = -Σ D_JS / T`.
pub fn episode_reward(growths: &[f64], jsd_terms: &[f64], c0: f64, cfg: &RewardConfig) -> Result<EpisodeReward> {
    if growths.len() != jsd_terms.len() {
        return Err(Error::DimensionMismatch {
            expected: growths.len(),
            actual: jsd_terms.len(),
        });
    }
    if growths.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::NonPositiveGrowth(c0));
    }
    let t = growths.len() as f64;
    let mut log_sum = 0.0;
    for &r in growths {
        if !(r > 0.0) {
            return Err(Error::NonPositiveGrowth(r));
        }
        log_sum += r.ln();
    }
    let j_r = (c0.ln() + log_sum) / t;
    let j_js = -jsd_terms.iter().sum::<f64>() / t;
    Ok(EpisodeReward {
        j: cfg.lambda1 * j_r + cfg.lambda2 * j_js,
        j_r,
        j_js,
    })
}

/// Per-step summand of the episodic objective: `λ1 log r_t - λ2 D_JS(a_rl, a_final)`.
pub fn per_step_reward(growth: f64, a_rl: &WeightVector, a_final: &WeightVector, cfg: &RewardConfig) -> Result<f64> {
    if !(growth > 0.0) {
        return Err(Error::NonPositiveGrowth(growth));
    }
    let js = if cfg.lambda2 == 0.0 { 0.0 } else { jensen_shannon(a_rl, a_final) };
    Ok(cfg.lambda1 * growth.ln() - cfg.lambda2 * js)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn jsd_extremes() {
        let p = w(&[0.2, 0.3, 0.5]);
        assert_eq!(jensen_shannon(&p, &p), 0.0);
        let d = jensen_shannon(&w(&[1.0, 0.0]), &w(&[0.0, 1.0]));
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn flat_episode_is_zero() {
        let r = episode_reward(&[1.0; 4], &[0.0; 4], 1.0, &RewardConfig::default()).unwrap();
        assert_eq!(r.j, 0.0);
    }

    #[test]
    fn two_step_hand_case() {
        let cfg = RewardConfig {
            lambda1: 1.0,
            lambda2: 0.0,
        };
        let r = episode_reward(&[1.1, 0.9], &[0.0, 0.0], 1.0, &cfg).unwrap();
        assert!((r.j - 0.5 * (1.1f64.ln() + 0.9f64.ln())).abs() < 1e-15);
        assert!((r.j + 0.0050252).abs() < 1e-6);
    }

    #[test]
    fn lambda2_zero_isolates_return_term() {
        let cfg = RewardConfig {
            lambda1: 2.0,
            lambda2: 0.0,
        };
        let r = episode_reward(&[1.01, 0.98, 1.03], &[0.1, 0.2, 0.05], 3.0, &cfg).unwrap();
        assert_eq!(r.j, 2.0 * r.j_r);
    }

    #[test]
    fn step_reward_cases() {
        let cfg = RewardConfig {
            lambda1: 1.0,
            lambda2: 1.0,
        };
        let a = w(&[0.5, 0.5]);
        assert_eq!(per_step_reward(1.0, &a, &a, &cfg).unwrap(), 0.0);
        let r = per_step_reward(1.0, &w(&[1.0, 0.0]), &w(&[0.0, 1.0]), &cfg).unwrap();
        assert!((r + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(per_step_reward(0.0, &a, &a, &cfg), Err(Error::NonPositiveGrowth(_))));
        assert!(matches!(
            episode_reward(&[1.0, -0.1], &[0.0, 0.0], 1.0, &cfg),
            Err(Error::NonPositiveGrowth(_))
        ));
    }
}
