use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::metrics::WeightVector;
use crate::nn::{softmax, softmax_backward, Activation, Adam, AdamConfig, DenseNet, Gradients};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub hidden: Vec<usize>,
    pub actor_optimizer: AdamConfig,
    pub critic_optimizer: AdamConfig,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Std-dev of Gaussian exploration noise on the actor logits.
    pub explore_sigma: f64,
    pub smooth_sigma: f64,
    pub smooth_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_optimizer: AdamConfig::default(),
            critic_optimizer: AdamConfig::default(),
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            explore_sigma: 0.1,
            smooth_sigma: 0.2,
            smooth_clip: 0.5,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup: 1000,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("td3.{m}")));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden must list positive layer widths");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.policy_delay == 0 {
            return bad("policy_delay must be at least 1");
        }
        if !(self.explore_sigma >= 0.0 && self.smooth_sigma >= 0.0 && self.smooth_clip >= 0.0) {
            return bad("noise parameters must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be positive and fit in the buffer");
        }
        for c in [&self.actor_optimizer, &self.critic_optimizer] {
            if !(c.lr > 0.0 && c.eps > 0.0 && (0.0..1.0).contains(&c.beta1) && (0.0..1.0).contains(&c.beta2)) {
                return bad("optimizer settings out of range");
            }
        }
        Ok(())
    }
}

/// Target-side values for one sampled transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSample {
    pub q1_next: f64,
    pub q2_next: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiagnostics {
    /// Mean of the two critics' MSE.
    pub critic_loss: f64,
    /// `-mean Q1(o, actor(o))`, present on policy updates.
    pub actor_loss: Option<f64>,
    pub did_policy_update: bool,
    pub targets: Vec<TargetSample>,
}

/// TD3 allocator: softmax actor over asset logits with twin critics.
#[derive(Debug, Clone)]
pub struct Td3Agent {
    config: Td3Config,
    obs_dim: usize,
    n_assets: usize,
    seed: u64,
    actor: DenseNet,
    actor_target: DenseNet,
    critic1: DenseNet,
    critic2: DenseNet,
    critic1_target: DenseNet,
    critic2_target: DenseNet,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    updates: u64,
    rng: ChaCha8Rng,
}

/// Serialized agent: all six networks, counters and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub config: Td3Config,
    pub obs_dim: usize,
    pub n_assets: usize,
    pub seed: u64,
    pub updates: u64,
    pub actor: DenseNet,
    pub actor_target: DenseNet,
    pub critic1: DenseNet,
    pub critic2: DenseNet,
    pub critic1_target: DenseNet,
    pub critic2_target: DenseNet,
}

impl Td3Agent {
    pub fn new(obs_dim: usize, n_assets: usize, config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || n_assets == 0 {
            return Err(Error::InvalidConfig("agent dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(n_assets);
        let mut critic_sizes = vec![obs_dim + n_assets];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = DenseNet::new(&actor_sizes, Activation::Relu, Activation::Linear, &mut rng)?;
        let critic1 = DenseNet::new(&critic_sizes, Activation::Relu, Activation::Linear, &mut rng)?;
        let critic2 = DenseNet::new(&critic_sizes, Activation::Relu, Activation::Linear, &mut rng)?;
        Ok(Self::assemble(
            config,
            obs_dim,
            n_assets,
            seed,
            0,
            [
                actor.clone(),
                actor,
                critic1.clone(),
                critic2.clone(),
                critic1,
                critic2,
            ],
            rng,
        ))
    }

    fn assemble(
        config: Td3Config,
        obs_dim: usize,
        n_assets: usize,
        seed: u64,
        updates: u64,
        nets: [DenseNet; 6],
        rng: ChaCha8Rng,
    ) -> Self {
        let [actor, actor_target, critic1, critic2, critic1_target, critic2_target] = nets;
        Self {
            actor_opt: Adam::new(actor.parameter_count(), config.actor_optimizer),
            critic1_opt: Adam::new(critic1.parameter_count(), config.critic_optimizer),
            critic2_opt: Adam::new(critic2.parameter_count(), config.critic_optimizer),
            config,
            obs_dim,
            n_assets,
            seed,
            actor,
            actor_target,
            critic1,
            critic2,
            critic1_target,
            critic2_target,
            updates,
            rng,
        }
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut DenseNet {
        &mut self.actor
    }

    pub fn actor_target(&self) -> &DenseNet {
        &self.actor_target
    }

    pub fn critics(&self) -> [&DenseNet; 2] {
        [&self.critic1, &self.critic2]
    }

    pub fn target_critics(&self) -> [&DenseNet; 2] {
        [&self.critic1_target, &self.critic2_target]
    }

    /// Deterministic action from the live actor.
    pub fn act(&self, obs: &Observation) -> Result<WeightVector> {
        self.act_features(&obs.features())
    }

    pub fn act_features(&self, features: &[f64]) -> Result<WeightVector> {
        self.check_obs(features)?;
        softmax(&self.actor.predict(features)?)
    }

    /// Actor action, with Gaussian noise on the logits when `explore` is set.
    pub fn select_action(&mut self, obs: &Observation, explore: bool) -> Result<WeightVector> {
        let features = obs.features();
        self.check_obs(&features)?;
        let mut logits = self.actor.predict(&features)?;
        if explore && self.config.explore_sigma > 0.0 {
            let noise = Normal::new(0.0, self.config.explore_sigma).expect("valid sigma");
            for l in &mut logits {
                *l += noise.sample(&mut self.rng);
            }
        }
        softmax(&logits)
    }

    /// Critic input: observation features followed by the action.
    pub fn critic_input(features: &[f64], action: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(features.len() + action.len());
        v.extend_from_slice(features);
        v.extend_from_slice(action);
        v
    }

    pub fn q_values(&self, obs: &Observation, action: &WeightVector) -> Result<(f64, f64)> {
        let input = Self::critic_input(&obs.features(), action.as_slice());
        Ok((self.critic1.predict(&input)?[0], self.critic2.predict(&input)?[0]))
    }

    /// One TD3 step on a uniformly sampled batch. Critics learn the value of `a_rl`.
    pub fn td3_update(&mut self, buffer: &ReplayBuffer, batch_size: usize) -> Result<UpdateDiagnostics> {
        if buffer.len() < batch_size || batch_size == 0 {
            return Err(Error::InsufficientBuffer {
                needed: batch_size.max(1),
                available: buffer.len(),
            });
        }
        let batch: Vec<Transition> = buffer.sample(batch_size, &mut self.rng)?.into_iter().cloned().collect();
        let b = batch.len() as f64;
        let smoothing = if self.config.smooth_sigma > 0.0 {
            Some(Normal::new(0.0, self.config.smooth_sigma).expect("valid sigma"))
        } else {
            None
        };

        let mut targets = Vec::with_capacity(batch.len());
        let mut inputs = Vec::with_capacity(batch.len());
        let mut features = Vec::with_capacity(batch.len());
        for tr in &batch {
            let f_prev = tr.o_prev.features();
            let f_next = tr.o_next.features();
            self.check_obs(&f_prev)?;
            self.check_obs(&f_next)?;
            let mut logits = self.actor_target.predict(&f_next)?;
            if let Some(dist) = &smoothing {
                let c = self.config.smooth_clip;
                for l in &mut logits {
                    *l += dist.sample(&mut self.rng).clamp(-c, c);
                }
            }
            let next_action = softmax(&logits)?;
            let next_input = Self::critic_input(&f_next, next_action.as_slice());
            let q1_next = self.critic1_target.predict(&next_input)?[0];
            let q2_next = self.critic2_target.predict(&next_input)?[0];
            let target = tr.reward + self.config.gamma * q1_next.min(q2_next);
            targets.push(TargetSample {
                q1_next,
                q2_next,
                target,
            });
            inputs.push(Self::critic_input(&f_prev, tr.a_rl.as_slice()));
            features.push(f_prev);
        }

        let mut critic_loss = 0.0;
        for which in 0..2 {
            let critic = if which == 0 { &self.critic1 } else { &self.critic2 };
            let mut grads = Gradients::zeros_like(critic);
            for (input, t) in inputs.iter().zip(&targets) {
                let (q, tape) = critic.forward(input)?;
                let err = q[0] - t.target;
                critic_loss += err * err / b / 2.0;
                critic.backward_into(&tape, &[2.0 * err / b], &mut grads)?;
            }
            if which == 0 {
                self.critic1_opt.step(self.critic1.params_mut(), &grads.params)?;
            } else {
                self.critic2_opt.step(self.critic2.params_mut(), &grads.params)?;
            }
        }
        self.updates += 1;

        let mut actor_loss = None;
        let did_policy_update = self.updates % self.config.policy_delay == 0;
        if did_policy_update {
            let mut grads = Gradients::zeros_like(&self.actor);
            let mut loss = 0.0;
            for f in &features {
                let (logits, actor_tape) = self.actor.forward(f)?;
                let action = softmax(&logits)?;
                let input = Self::critic_input(f, action.as_slice());
                let (q, critic_tape) = self.critic1.forward(&input)?;
                loss -= q[0] / b;
                let dq = self.critic1.input_gradient(&critic_tape, &[-1.0 / b])?;
                let d_logits = softmax_backward(action.as_slice(), &dq[self.obs_dim..]);
                self.actor.backward_into(&actor_tape, &d_logits, &mut grads)?;
            }
            self.actor_opt.step(self.actor.params_mut(), &grads.params)?;
            actor_loss = Some(loss);

            let tau = self.config.tau;
            self.actor_target.polyak_from(&self.actor, tau)?;
            self.critic1_target.polyak_from(&self.critic1, tau)?;
            self.critic2_target.polyak_from(&self.critic2, tau)?;
        }

        Ok(UpdateDiagnostics {
            critic_loss,
            actor_loss,
            did_policy_update,
            targets,
        })
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            n_assets: self.n_assets,
            seed: self.seed,
            updates: self.updates,
            actor: self.actor.clone(),
            actor_target: self.actor_target.clone(),
            critic1: self.critic1.clone(),
            critic2: self.critic2.clone(),
            critic1_target: self.critic1_target.clone(),
            critic2_target: self.critic2_target.clone(),
        }
    }

    /// Rebuilds an agent; optimizer moments start fresh.
    pub fn from_checkpoint(ck: AgentCheckpoint) -> Result<Self> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported agent version {}", ck.version)));
        }
        ck.config.validate()?;
        let obs_dim = ck.obs_dim;
        let n_assets = ck.n_assets;
        let actor_ok = |n: &DenseNet| n.input_dim() == obs_dim && n.output_dim() == n_assets;
        let critic_ok = |n: &DenseNet| n.input_dim() == obs_dim + n_assets && n.output_dim() == 1;
        if !(actor_ok(&ck.actor) && ck.actor_target.shapes() == ck.actor.shapes()) {
            return Err(Error::Checkpoint("actor shapes do not match the agent dimensions".into()));
        }
        for c in [&ck.critic1, &ck.critic2, &ck.critic1_target, &ck.critic2_target] {
            if !critic_ok(c) || c.shapes() != ck.critic1.shapes() {
                return Err(Error::Checkpoint("critic shapes do not match the agent dimensions".into()));
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(ck.seed ^ ck.updates.rotate_left(32));
        Ok(Self::assemble(
            ck.config,
            obs_dim,
            n_assets,
            ck.seed,
            ck.updates,
            [
                ck.actor,
                ck.actor_target,
                ck.critic1,
                ck.critic2,
                ck.critic1_target,
                ck.critic2_target,
            ],
            rng,
        ))
    }

    fn check_obs(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                actual: features.len(),
            });
        }
        Ok(())
    }
}
