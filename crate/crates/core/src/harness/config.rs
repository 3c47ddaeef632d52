use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::BaselineSpec;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::market_data::{load_ohlcv, synth_generate, LoadConfig, OhlcvSeries, SynthSpec, DEFAULT_COV_WINDOW};
use crate::metrics::MetricsConfig;
use crate::nn::AdamConfig;
use crate::observer::{DcObserverConfig, MlpObserverConfig};
use crate::rl::{RewardConfig, Td3Config};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthSpec),
    File {
        path: PathBuf,
        #[serde(default)]
        format: LoadConfig,
    },
}

impl DataSource {
    /// Loads or generates the series; relative file paths resolve against `base_dir`.
    pub fn load(&self, base_dir: Option<&Path>) -> Result<OhlcvSeries> {
        match self {
            DataSource::Synth(spec) => synth_generate(spec, spec.seed),
            DataSource::File { path, format } => {
                let resolved = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                load_ohlcv(&resolved, format)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Splits {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Splits {
    fn default() -> Self {
        Self {
            train: 0.5,
            validation: 0.2,
            test: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// RL allocator alone.
    Single,
    /// RL plus solver under a fixed neutral boundary.
    Dual,
    /// RL, solver and market observer.
    #[default]
    Triple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    #[default]
    Dc,
    Mlp,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverSettings {
    pub kind: ObserverKind,
    pub theta: f64,
    pub lookback: usize,
    pub base_risk_window: usize,
    pub base_risk_quantile: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    /// MLP boundary multiplier.
    pub scale: f64,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    /// Profile updates happen every this many training episodes.
    pub update_every: usize,
    /// Most recent history-profile records kept.
    pub profile_capacity: usize,
}

impl Default for ObserverSettings {
    fn default() -> Self {
        let dc = DcObserverConfig::default();
        let mlp = MlpObserverConfig::default();
        Self {
            kind: ObserverKind::Dc,
            theta: dc.theta,
            lookback: dc.lookback,
            base_risk_window: dc.base_risk_window,
            base_risk_quantile: dc.base_risk_quantile,
            up_factor: dc.up_factor,
            down_factor: dc.down_factor,
            scale: mlp.scale,
            hidden: mlp.hidden,
            lr: mlp.optimizer.lr,
            batch_size: mlp.batch_size,
            update_every: 1,
            profile_capacity: 20_000,
        }
    }
}

impl ObserverSettings {
    pub fn dc(&self, metrics: &MetricsConfig) -> DcObserverConfig {
        DcObserverConfig {
            theta: self.theta,
            lookback: self.lookback,
            base_risk_window: self.base_risk_window,
            base_risk_quantile: self.base_risk_quantile,
            up_factor: self.up_factor,
            down_factor: self.down_factor,
            risk_form: metrics.risk_form,
        }
    }

    pub fn mlp(&self, metrics: &MetricsConfig) -> MlpObserverConfig {
        MlpObserverConfig {
            hidden: self.hidden.clone(),
            optimizer: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            scale: self.scale,
            risk_form: metrics.risk_form,
        }
    }

    /// Days of history the observer needs before a segment starts.
    pub fn history_len(&self) -> usize {
        self.lookback.max(self.base_risk_window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Validation objective J.
    #[default]
    J,
    Sharpe,
}

/// Entry of the comparison list: a pipeline variant name or a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyEntry {
    Named(String),
    Baseline(BaselineSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    pub splits: Splits,
    pub max_episode: usize,
    pub seed: u64,
    pub n_seeds: usize,
    /// Explicit seeds; overrides `seed` and `n_seeds`.
    pub seeds: Option<Vec<u64>>,
    pub tier: Tier,
    pub observer: ObserverSettings,
    pub reward: RewardConfig,
    pub solver: SolverConfig,
    pub env: EnvConfig,
    pub metrics: MetricsConfig,
    pub td3: Td3Config,
    /// Covariance window k.
    pub risk_window: usize,
    pub selection: Selection,
    pub strategies: Vec<StrategyEntry>,
    /// Row the Wilcoxon tests compare against.
    pub reference: String,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synth(SynthSpec {
                assets: 5,
                regimes: vec![crate::market_data::Regime {
                    drift: 0.0003,
                    volatility: 0.01,
                    length: 500,
                    correlation: 0.3,
                }],
                start_price: 100.0,
                start_date: "2015-01-05".into(),
                volatility_scales: Vec::new(),
                drift_offsets: Vec::new(),
                betas: Vec::new(),
                seed: 0,
            }),
            splits: Splits::default(),
            max_episode: 10,
            seed: 0,
            n_seeds: 10,
            seeds: None,
            tier: Tier::Triple,
            observer: ObserverSettings::default(),
            reward: RewardConfig::default(),
            solver: SolverConfig::default(),
            env: EnvConfig::default(),
            metrics: MetricsConfig::default(),
            td3: Td3Config::default(),
            risk_window: DEFAULT_COV_WINDOW,
            selection: Selection::J,
            strategies: vec![
                StrategyEntry::Named("masa".into()),
                StrategyEntry::Named("td3".into()),
                StrategyEntry::Named("crp".into()),
            ],
            reference: "masa".into(),
            alpha: 0.05,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.splits;
        if [s.train, s.validation, s.test].iter().any(|v| !(*v > 0.0)) || (s.train + s.validation + s.test - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("splits must be positive and sum to 1".into()));
        }
        if self.max_episode == 0 {
            return Err(Error::InvalidConfig("max_episode must be at least 1".into()));
        }
        if self.seed_list().is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.risk_window < 2 {
            return Err(Error::InvalidConfig("risk_window must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if self.tier == Tier::Triple && self.observer.kind == ObserverKind::None {
            return Err(Error::InvalidConfig("triple tier needs an observer".into()));
        }
        self.env.validate()?;
        self.reward.validate()?;
        self.solver.validate()?;
        self.td3.validate()?;
        self.observer.dc(&self.metrics).validate()?;
        self.observer.mlp(&self.metrics).validate()?;
        if self.observer.update_every == 0 || self.observer.profile_capacity == 0 {
            return Err(Error::InvalidConfig("observer update cadence and capacity must be positive".into()));
        }
        for entry in &self.strategies {
            if let StrategyEntry::Named(name) = entry {
                if super::Variant::from_name(name, self).is_none() && BaselineSpec::from_name(name).is_err() {
                    return Err(Error::UnknownStrategy(name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(list) => list.clone(),
            None => (0..self.n_seeds as u64).map(|i| self.seed.wrapping_add(i)).collect(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Inclusive day ranges traded in each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segments {
    pub train: (usize, usize),
    pub validation: (usize, usize),
    pub test: (usize, usize),
}

impl Segments {
    /// Splits `n_days` in time order; each segment trades from its first usable day.
    ///
    /// `warmup` is the first day with enough history for observations,
    /// covariance and observer priming.
    pub fn new(n_days: usize, splits: Splits, warmup: usize) -> Result<Self> {
        let a = (n_days as f64 * splits.train).round() as usize;
        let b = a + (n_days as f64 * splits.validation).round() as usize;
        let b = b.min(n_days);
        let check = |segment: &'static str, lo: usize, hi: usize| -> Result<(usize, usize)> {
            let start = lo.max(warmup);
            if hi < start + 2 || hi >= n_days {
                return Err(Error::DataSplitTooSmall {
                    segment,
                    needed: 2,
                    available: hi.saturating_sub(start),
                });
            }
            Ok((start, hi))
        };
        Ok(Self {
            train: check("train", 0, a.saturating_sub(1))?,
            validation: check("validation", a, b.saturating_sub(1))?,
            test: check("test", b, n_days - 1)?,
        })
    }

    pub fn hash(&self, series: &OhlcvSeries) -> String {
        let mut h = Sha256::new();
        for (lo, hi) in [self.train, self.validation, self.test] {
            h.update((lo as u64).to_le_bytes());
            h.update((hi as u64).to_le_bytes());
        }
        for c in series.closes() {
            h.update(c.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
