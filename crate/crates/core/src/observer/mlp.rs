use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ObserverRecord, RiskSignal};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::metrics::RiskForm;
use crate::nn::{Activation, Adam, AdamConfig, DenseNet, Gradients};

/// Equal-weight absolute returns are multiplied by this before entering the net.
const FEATURE_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpObserverConfig {
    pub hidden: Vec<usize>,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    /// Multiplier from predicted risk to boundary.
    pub scale: f64,
    pub risk_form: RiskForm,
}

impl Default for MlpObserverConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            optimizer: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            batch_size: 32,
            scale: 1.0,
            risk_form: RiskForm::NormOfProduct,
        }
    }
}

impl MlpObserverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) || self.batch_size == 0 {
            return Err(Error::InvalidConfig("mlp observer sizes must be positive".into()));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidConfig("observer.scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Small regression net predicting next-day realized risk of the equal-weight portfolio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpObserver {
    pub config: MlpObserverConfig,
    pub net: DenseNet,
    /// Net outputs are in multiples of this risk level.
    pub target_scale: f64,
    #[serde(skip, default = "no_optimizer")]
    optimizer: Option<Adam>,
}

fn no_optimizer() -> Option<Adam> {
    None
}

impl MlpObserver {
    pub fn new(window: usize, config: MlpObserverConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![window];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DenseNet::new(&sizes, Activation::Relu, Activation::Linear, &mut rng)?;
        Ok(Self::with_net(net, config))
    }

    pub fn with_net(net: DenseNet, config: MlpObserverConfig) -> Self {
        Self {
            config,
            net,
            target_scale: 1.0,
            optimizer: None,
        }
    }

    /// `100 |r|` of the equal-weight portfolio over the observation window.
    pub fn features(obs: &Observation) -> Vec<f64> {
        obs.equal_weight_returns().iter().map(|r| FEATURE_SCALE * r.abs()).collect()
    }

    fn realized(&self, obs: &Observation) -> Result<f64> {
        let n = obs.n_assets();
        obs.realized_risk(&vec![1.0 / n as f64; n], self.config.risk_form)
    }

    /// Predicted risk in `σ_α` units.
    pub fn predict(&self, obs: &Observation) -> Result<f64> {
        Ok(self.net.predict(&Self::features(obs))?[0] * self.target_scale)
    }

    pub fn observe(&self, obs: &Observation) -> Result<RiskSignal> {
        let predicted = self.predict(obs)?;
        let realized = self.realized(obs)?;
        let trend = if realized > predicted {
            1.0
        } else if realized < predicted {
            -1.0
        } else {
            0.0
        };
        let ratio = if predicted > 0.0 { realized / predicted } else { 1.0 };
        Ok(RiskSignal {
            sigma_s: (predicted * self.config.scale).max(0.0),
            v_m: vec![trend, predicted / self.target_scale, ratio],
        })
    }

    /// One epoch of MSE regression from `o_prev` features to realized risk of `o_next`.
    /// Returns the mean loss seen during the epoch.
    pub fn update_profile(&mut self, records: &[ObserverRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let samples = records
            .iter()
            .map(|r| Ok((Self::features(&r.o_prev), self.realized(&r.o_next)?)))
            .collect::<Result<Vec<_>>>()?;
        if self.optimizer.is_none() {
            let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
            if mean > 0.0 {
                self.target_scale = mean;
            }
            self.optimizer = Some(Adam::new(self.net.parameter_count(), self.config.optimizer));
        }
        let scale = self.target_scale;
        let mut total = 0.0;
        for chunk in samples.chunks(self.config.batch_size) {
            let b = chunk.len() as f64;
            let mut grads = Gradients::zeros_like(&self.net);
            for (x, y) in chunk {
                let (out, tape) = self.net.forward(x)?;
                let err = out[0] - y / scale;
                total += err * err;
                self.net.backward_into(&tape, &[2.0 * err / b], &mut grads)?;
            }
            let opt = self.optimizer.as_mut().expect("optimizer initialized");
            opt.step(self.net.params_mut(), &grads.params)?;
        }
        Ok(total / samples.len() as f64)
    }
}
