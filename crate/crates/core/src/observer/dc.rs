use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{quantile, ObserverRecord, RiskSignal};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::metrics::RiskForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcKind {
    Upturn,
    Downturn,
}

/// A confirmed directional change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcEvent {
    pub kind: DcKind,
    /// Index at which the move reached the threshold.
    pub confirmation: usize,
    /// Index of the extreme the move is measured from.
    pub extreme: usize,
    /// Fractional move from the extreme to the confirmation price.
    pub magnitude: f64,
}

/// Directional-change events of a price path at threshold `theta`.
///
/// Before the first event both the running high and low are tracked; after
/// it, only the extreme of the current trend.
pub fn dc_detect(prices: &[f64], theta: f64) -> Vec<DcEvent> {
    let mut events = Vec::new();
    let Some(&first) = prices.first() else {
        return events;
    };
    let (mut high, mut high_at) = (first, 0);
    let (mut low, mut low_at) = (first, 0);
    let mut trend: Option<DcKind> = None;
    for (i, &p) in prices.iter().enumerate().skip(1) {
        let up = trend != Some(DcKind::Upturn) && p >= low * (1.0 + theta);
        let down = trend != Some(DcKind::Downturn) && p <= high * (1.0 - theta);
        if up {
            events.push(DcEvent {
                kind: DcKind::Upturn,
                confirmation: i,
                extreme: low_at,
                magnitude: p / low - 1.0,
            });
            trend = Some(DcKind::Upturn);
            (high, high_at) = (p, i);
        } else if down {
            events.push(DcEvent {
                kind: DcKind::Downturn,
                confirmation: i,
                extreme: high_at,
                magnitude: 1.0 - p / high,
            });
            trend = Some(DcKind::Downturn);
            (low, low_at) = (p, i);
        } else {
            if p > high {
                (high, high_at) = (p, i);
            }
            if p < low {
                (low, low_at) = (p, i);
            }
        }
    }
    events
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcObserverConfig {
    pub theta: f64,
    /// Days of index history scanned for events.
    pub lookback: usize,
    /// Days of realized risk behind the default base risk.
    pub base_risk_window: usize,
    pub base_risk_quantile: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    pub risk_form: RiskForm,
}

impl Default for DcObserverConfig {
    fn default() -> Self {
        Self {
            theta: 0.005,
            lookback: 21,
            base_risk_window: 63,
            base_risk_quantile: 0.5,
            up_factor: 1.5,
            down_factor: 0.5,
            risk_form: RiskForm::NormOfProduct,
        }
    }
}

impl DcObserverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig("observer.theta must lie in (0, 1)".into()));
        }
        if self.lookback < 2 || self.base_risk_window == 0 {
            return Err(Error::InvalidConfig("observer windows too short".into()));
        }
        if !(0.0..=1.0).contains(&self.base_risk_quantile) {
            return Err(Error::InvalidConfig("observer.base_risk_quantile must lie in [0, 1]".into()));
        }
        if !(self.up_factor >= 0.0 && self.down_factor >= 0.0) {
            return Err(Error::InvalidConfig("observer boundary factors must be non-negative".into()));
        }
        Ok(())
    }

    pub fn history_len(&self) -> usize {
        self.lookback.max(self.base_risk_window)
    }
}

/// Maps the latest DC trend of the equal-weight index to a risk boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcObserver {
    pub config: DcObserverConfig,
    /// Calibrated base risk; the trailing quantile is used until set.
    pub base_risk: Option<f64>,
    index: VecDeque<f64>,
    realized: VecDeque<f64>,
}

impl DcObserver {
    pub fn new(config: DcObserverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            base_risk: None,
            index: VecDeque::new(),
            realized: VecDeque::new(),
        })
    }

    pub fn history(&self) -> usize {
        self.index.len()
    }

    pub fn clear_history(&mut self) {
        self.index.clear();
        self.realized.clear();
    }

    /// Appends the newest day of `obs` to the index history.
    pub fn push(&mut self, obs: &Observation) -> Result<()> {
        let n = obs.n_assets();
        let newest = &obs.window[obs.window.len() - n..];
        let growth = newest.iter().sum::<f64>() / n as f64;
        let level = self.index.back().copied().unwrap_or(1.0) * growth;
        let ew = vec![1.0 / n as f64; n];
        let realized = obs.realized_risk(&ew, self.config.risk_form)?;
        let cap = self.config.history_len();
        self.index.push_back(level);
        self.realized.push_back(realized);
        while self.index.len() > cap {
            self.index.pop_front();
            self.realized.pop_front();
        }
        Ok(())
    }

    /// Pushes `obs` then emits the boundary and market vector.
    pub fn observe(&mut self, obs: &Observation) -> Result<RiskSignal> {
        self.push(obs)?;
        self.signal()
    }

    pub fn signal(&self) -> Result<RiskSignal> {
        let lookback = self.config.lookback;
        if self.index.len() < lookback {
            return Err(Error::InsufficientHistory {
                needed: lookback,
                available: self.index.len(),
            });
        }
        let prices: Vec<f64> = self.index.iter().skip(self.index.len() - lookback).copied().collect();
        let realized: Vec<f64> = self.realized.iter().copied().collect();
        let base = match self.base_risk {
            Some(b) => b,
            None => quantile(&realized, self.config.base_risk_quantile),
        };
        let events = dc_detect(&prices, self.config.theta);
        let (trend, intensity) = match events.last() {
            Some(e) => (
                match e.kind {
                    DcKind::Upturn => 1.0,
                    DcKind::Downturn => -1.0,
                },
                e.magnitude / self.config.theta,
            ),
            None => (0.0, 0.0),
        };
        let factor = if trend > 0.0 {
            self.config.up_factor
        } else if trend < 0.0 {
            self.config.down_factor
        } else {
            1.0
        };
        let recent = (realized.len() / 4).max(1);
        let all_mean = realized.iter().sum::<f64>() / realized.len() as f64;
        let recent_mean = realized[realized.len() - recent..].iter().sum::<f64>() / recent as f64;
        let vol_ratio = if all_mean > 0.0 { recent_mean / all_mean } else { 1.0 };
        Ok(RiskSignal {
            sigma_s: (base * factor).max(0.0),
            v_m: vec![trend, intensity, vol_ratio],
        })
    }

    /// Recalibrates the base risk to the configured quantile of realized equal-weight risk.
    pub fn update_profile(&mut self, records: &[ObserverRecord]) -> Result<()> {
        if records.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = records[0].o_next.n_assets();
        let ew = vec![1.0 / n as f64; n];
        let realized = records
            .iter()
            .map(|r| r.o_next.realized_risk(&ew, self.config.risk_form))
            .collect::<Result<Vec<f64>>>()?;
        self.base_risk = Some(quantile(&realized, self.config.base_risk_quantile));
        Ok(())
    }
}
