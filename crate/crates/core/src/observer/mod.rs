//! Market observer: suggests a short-term risk boundary and a market vector.

mod dc;
mod mlp;

pub use dc::{dc_detect, DcEvent, DcKind, DcObserver, DcObserverConfig};
pub use mlp::{MlpObserver, MlpObserverConfig};

use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::Result;

/// Boundary and market vector for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSignal {
    pub sigma_s: f64,
    /// `[trend in {-1, 0, 1}, event intensity, realized volatility ratio]`.
    pub v_m: Vec<f64>,
}

/// One entry of the observer's history profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverRecord {
    pub o_prev: Observation,
    pub o_next: Observation,
    pub sigma_s_prev: f64,
    pub v_m_prev: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Observer {
    Dc(DcObserver),
    Mlp(MlpObserver),
}

impl Observer {
    /// Days of history that must be pushed before the first signal.
    pub fn warmup(&self) -> usize {
        match self {
            Observer::Dc(o) => o.config.history_len(),
            Observer::Mlp(_) => 0,
        }
    }

    /// Feeds a day without emitting a signal.
    pub fn push(&mut self, obs: &Observation) -> Result<()> {
        match self {
            Observer::Dc(o) => o.push(obs),
            Observer::Mlp(_) => Ok(()),
        }
    }

    pub fn clear_history(&mut self) {
        if let Observer::Dc(o) = self {
            o.clear_history();
        }
    }

    pub fn observe(&mut self, obs: &Observation) -> Result<RiskSignal> {
        match self {
            Observer::Dc(o) => o.observe(obs),
            Observer::Mlp(o) => o.observe(obs),
        }
    }

    pub fn update_profile(&mut self, records: &[ObserverRecord]) -> Result<()> {
        match self {
            Observer::Dc(o) => o.update_profile(records),
            Observer::Mlp(o) => o.update_profile(records).map(|_| ()),
        }
    }
}

/// Linear-interpolation quantile; `q` in `[0, 1]`, `values` non-empty.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::WeightVector;

    fn obs(window: Vec<f64>, n: usize) -> Observation {
        Observation {
            window,
            holdings: WeightVector::uniform(n),
            market: vec![0.0; 3],
            day: 0,
        }
    }

    #[test]
    fn quantile_of_constant() {
        assert_eq!(quantile(&[0.3; 7], 0.5), 0.3);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }

    #[test]
    fn dc_neutral_and_trend_boundaries() {
        let cfg = DcObserverConfig {
            lookback: 4,
            base_risk_window: 4,
            theta: 0.02,
            ..DcObserverConfig::default()
        };
        let mut o = DcObserver::new(cfg).unwrap();
        o.base_risk = Some(0.01);
        let flat = obs(vec![1.0, 1.0, 1.01, 0.99, 1.0, 1.0], 2);
        for _ in 0..3 {
            o.push(&flat).unwrap();
        }
        assert!(matches!(DcObserver::new(o.config.clone()).unwrap().signal(), Err(_)));
        let s = o.observe(&flat).unwrap();
        assert_eq!(s.sigma_s, 0.01);
        assert_eq!(s.v_m[0], 0.0);

        // newest relatives fall 3%: a downturn from the flat high
        let drop = obs(vec![1.0, 1.0, 1.01, 0.99, 0.97, 0.97], 2);
        let s = o.observe(&drop).unwrap();
        assert_eq!(s.v_m[0], -1.0);
        assert!((s.sigma_s - 0.005).abs() < 1e-15);
        let rise = obs(vec![1.0, 1.0, 1.01, 0.99, 1.04, 1.04], 2);
        let s = o.observe(&rise).unwrap();
        assert_eq!(s.v_m[0], 1.0);
        assert!((s.sigma_s - 0.015).abs() < 1e-15);
    }

    #[test]
    fn dc_recalibration() {
        let mut o = DcObserver::new(DcObserverConfig::default()).unwrap();
        assert!(o.update_profile(&[]).is_err());
        let x = obs(vec![1.01, 0.99, 0.98, 1.02, 1.0, 1.0], 2);
        let rec = ObserverRecord {
            o_prev: x.clone(),
            o_next: x.clone(),
            sigma_s_prev: 0.0,
            v_m_prev: vec![0.0; 3],
        };
        o.update_profile(&[rec.clone(), rec.clone(), rec]).unwrap();
        let c = x.realized_risk(&[0.5, 0.5], crate::metrics::RiskForm::NormOfProduct).unwrap();
        assert!((o.base_risk.unwrap() - c).abs() < 1e-18);
    }

    #[test]
    fn zero_mlp_predicts_bias() {
        let mut m = MlpObserver::new(3, MlpObserverConfig::default(), 1).unwrap();
        let p = m.net.params_mut();
        p.iter_mut().for_each(|v| *v = 0.0);
        let last = p.len() - 1;
        p[last] = 0.02;
        m.config.scale = 2.0;
        let x = obs(vec![1.01, 0.99, 0.98, 1.02, 1.0, 1.03], 2);
        let s = m.observe(&x).unwrap();
        assert!((s.sigma_s - 0.04).abs() < 1e-15);
        assert_eq!(s, m.observe(&x).unwrap());
    }
}
