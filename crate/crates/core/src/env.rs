//! Trading environment: observations, order execution and capital accounting.
//!
//! An order placed on day `t` executes at the day-`t` close and earns the
//! price relatives of day `t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{sample_covariance, OhlcvSeries};
use crate::metrics::{strategy_risk, RiskForm, WeightVector};

/// Length of the market vector carried in observations.
pub const MARKET_VECTOR_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Lookback window W of price relatives in each observation.
    pub window: usize,
    /// Proportional transaction cost on half-turnover.
    pub c_tx: f64,
    /// Initial capital.
    pub c0: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            window: 10,
            c_tx: 0.0,
            c0: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("env.window must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.c_tx) {
            return Err(Error::InvalidConfig("env.c_tx must lie in [0, 1)".into()));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidConfig("env.c0 must be positive".into()));
        }
        Ok(())
    }
}

/// Market state seen by the agents on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// W x N price relatives, oldest day first.
    pub window: Vec<f64>,
    pub holdings: WeightVector,
    /// Most recent market vector from the observer (zeros when none).
    pub market: Vec<f64>,
    pub day: usize,
}

impl Observation {
    pub fn n_assets(&self) -> usize {
        self.holdings.len()
    }

    pub fn window_days(&self) -> usize {
        self.window.len() / self.n_assets()
    }

    pub fn feature_len(window: usize, n_assets: usize) -> usize {
        window * n_assets + n_assets + MARKET_VECTOR_LEN
    }

    pub fn len(&self) -> usize {
        self.window.len() + self.holdings.len() + self.market.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat network input. Relatives are centred on zero.
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.window.iter().map(|r| r - 1.0));
        v.extend_from_slice(self.holdings.as_slice());
        v.extend_from_slice(&self.market);
        v
    }

    /// Simple returns of the window, day-major.
    pub fn window_returns(&self) -> Vec<f64> {
        self.window.iter().map(|r| r - 1.0).collect()
    }

    /// Daily returns of an equal-weight portfolio over the window.
    pub fn equal_weight_returns(&self) -> Vec<f64> {
        let n = self.n_assets();
        self.window
            .chunks_exact(n)
            .map(|row| row.iter().sum::<f64>() / n as f64 - 1.0)
            .collect()
    }

    /// `σ_α` of `weights` against the covariance of this observation's window.
    pub fn realized_risk(&self, weights: &[f64], form: RiskForm) -> Result<f64> {
        let cov = sample_covariance(&self.window_returns(), self.n_assets())?;
        strategy_risk(weights, &cov, form)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub capital: f64,
    /// Weights after the latest day's price drift.
    pub holdings: WeightVector,
    pub day: usize,
    pub done: bool,
    pub cost_paid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    /// `C_{t+1} / C_t`.
    pub growth: f64,
    pub done: bool,
}

/// Episode over days `start..=end` of one price series.
#[derive(Debug, Clone)]
pub struct TradingEnv {
    config: EnvConfig,
    n_assets: usize,
    n_days: usize,
    // day-major relatives; row 0 is all ones
    relatives: Vec<f64>,
    start: usize,
    end: usize,
    market: Vec<f64>,
    state: EnvState,
}

impl TradingEnv {
    pub fn new(series: &OhlcvSeries, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let n = series.n_assets();
        let t = series.n_days();
        if t <= config.window + 1 {
            return Err(Error::SeriesTooShort {
                needed: config.window + 1,
                available: t,
            });
        }
        let mut relatives = vec![1.0; n];
        for day in 1..t {
            relatives.extend(series.price_relatives(day)?);
        }
        Ok(Self {
            n_assets: n,
            n_days: t,
            relatives,
            start: config.window,
            end: t - 1,
            market: vec![0.0; MARKET_VECTOR_LEN],
            state: EnvState {
                capital: config.c0,
                holdings: WeightVector::uniform(n),
                day: config.window,
                done: false,
                cost_paid: 0.0,
            },
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn observation_len(&self) -> usize {
        Observation::feature_len(self.config.window, self.n_assets)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Relatives of `day` (`close(day) / close(day - 1)`).
    pub fn relatives(&self, day: usize) -> &[f64] {
        &self.relatives[day * self.n_assets..(day + 1) * self.n_assets]
    }

    /// Resets over the whole series: capital `C0`, uniform holdings, day `W`.
    pub fn reset(&mut self) -> Result<Observation> {
        self.reset_range(self.config.window, self.n_days - 1)
    }

    /// Resets to trade from day `start` until the close of day `end`.
    pub fn reset_range(&mut self, start: usize, end: usize) -> Result<Observation> {
        let w = self.config.window;
        if start < w || end >= self.n_days || end <= start {
            return Err(Error::SeriesTooShort {
                needed: start.max(w) + 1,
                available: end.min(self.n_days - 1).saturating_sub(start),
            });
        }
        self.start = start;
        self.end = end;
        self.market = vec![0.0; MARKET_VECTOR_LEN];
        self.state = EnvState {
            capital: self.config.c0,
            holdings: WeightVector::uniform(self.n_assets),
            day: start,
            done: false,
            cost_paid: 0.0,
        };
        Ok(self.observe())
    }

    /// Sets the market vector that subsequent observations carry.
    pub fn set_market_vector(&mut self, v_m: &[f64]) {
        self.market.clear();
        self.market.extend(v_m.iter().take(MARKET_VECTOR_LEN));
        self.market.resize(MARKET_VECTOR_LEN, 0.0);
    }

    /// Observation of `day` with uniform holdings and a zero market vector.
    pub fn observation_at(&self, day: usize) -> Result<Observation> {
        let w = self.config.window;
        if day < w || day >= self.n_days {
            return Err(Error::IndexOutOfRange {
                index: day,
                lo: w,
                hi: self.n_days - 1,
            });
        }
        let n = self.n_assets;
        Ok(Observation {
            window: self.relatives[(day + 1 - w) * n..(day + 1) * n].to_vec(),
            holdings: WeightVector::uniform(n),
            market: vec![0.0; MARKET_VECTOR_LEN],
            day,
        })
    }

    /// Day-major relatives of days `0..=day`; row 0 is all ones.
    pub fn relatives_through(&self, day: usize) -> &[f64] {
        &self.relatives[..(day + 1) * self.n_assets]
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn observe(&self) -> Observation {
        let n = self.n_assets;
        let day = self.state.day;
        let w = self.config.window;
        Observation {
            window: self.relatives[(day + 1 - w) * n..(day + 1) * n].to_vec(),
            holdings: self.state.holdings.clone(),
            market: self.market.clone(),
            day,
        }
    }

    /// Rebalances to `action`, pays costs, and advances one day.
    pub fn step(&mut self, action: &WeightVector) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::EpisodeFinished);
        }
        if action.len() != self.n_assets {
            return Err(Error::InvalidAction(format!(
                "{} weights for {} assets",
                action.len(),
                self.n_assets
            )));
        }
        let turnover: f64 = action
            .as_slice()
            .iter()
            .zip(self.state.holdings.as_slice())
            .map(|(a, h)| (a - h).abs())
            .sum::<f64>()
            / 2.0;
        let cost = self.config.c_tx * turnover;
        let next_day = self.state.day + 1;
        let rel = self.relatives(next_day).to_vec();
        let gross = action.dot(&rel)?;
        let growth = (1.0 - cost) * gross;

        self.state.cost_paid += self.state.capital * cost;
        self.state.capital *= growth;
        self.state.holdings = drifted_holdings(action, &rel)?;
        self.state.day = next_day;
        self.state.done = next_day >= self.end;
        Ok(StepOutcome {
            observation: self.observe(),
            growth,
            done: self.state.done,
        })
    }
}

/// Weights after one day of price moves: `h_i r_i / Σ h_j r_j`.
pub fn drifted_holdings(holdings: &WeightVector, relatives: &[f64]) -> Result<WeightVector> {
    let total = holdings.dot(relatives)?;
    let drifted: Vec<f64> = holdings
        .as_slice()
        .iter()
        .zip(relatives)
        .map(|(h, r)| h * r / total)
        .collect();
    let sum: f64 = drifted.iter().sum();
    WeightVector::new(drifted.into_iter().map(|w| w / sum).collect())
}
