use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ObserverKind, RunConfig, Segments, Selection, Tier};
use crate::baselines::BaselineSpec;
use crate::env::{Observation, TradingEnv};
use crate::error::{Error, Result};
use crate::market_data::{rolling_covariance, CovarianceEstimate, OhlcvSeries, ReturnsMatrix};
use crate::metrics::{short_term_risk, PerformanceReport, WeightVector};
use crate::observer::{quantile, DcObserver, MlpObserver, Observer, ObserverRecord, RiskSignal};
use crate::rl::{
    episode_reward, jensen_shannon, per_step_reward, AgentCheckpoint, ReplayBuffer, RewardConfig, Td3Agent,
    Transition,
};
use crate::solver::{propose_control, RiskControlProblem, SolverResult};

/// A configuration of the agent pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub tier: Tier,
    pub observer: ObserverKind,
    pub lambda2: f64,
}

impl Variant {
    /// Pipeline names understood in strategy lists; `masa` is the configured tier.
    pub fn from_name(name: &str, cfg: &RunConfig) -> Option<Self> {
        let (tier, observer) = match name {
            "masa" => (cfg.tier, cfg.observer.kind),
            "td3" | "single" => (Tier::Single, ObserverKind::None),
            "dual" => (Tier::Dual, ObserverKind::None),
            "masa-dc" | "triple-dc" => (Tier::Triple, ObserverKind::Dc),
            "masa-mlp" | "triple-mlp" => (Tier::Triple, ObserverKind::Mlp),
            _ => return None,
        };
        let observer = if tier == Tier::Triple { observer } else { ObserverKind::None };
        Some(Self {
            name: name.to_string(),
            tier,
            observer,
            lambda2: cfg.reward.lambda2,
        })
    }

    pub fn reward(&self, base: &RewardConfig) -> RewardConfig {
        RewardConfig {
            lambda1: base.lambda1,
            lambda2: self.lambda2,
        }
    }
}

/// Series, segments and per-day covariances shared by every run of a config.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub series: OhlcvSeries,
    pub segments: Segments,
    pub split_hash: String,
    /// Median equal-weight risk over the training segment; the dual tier's boundary.
    pub static_boundary: f64,
    /// `covariances[t]`: the k returns up to and including day `t`.
    covariances: Vec<Option<CovarianceEstimate>>,
}

impl PreparedData {
    pub fn new(series: OhlcvSeries, cfg: &RunConfig) -> Result<Self> {
        let warmup = warmup_day(cfg);
        let segments = Segments::new(series.n_days(), cfg.splits, warmup)?;
        Self::with_segments(series, cfg, segments)
    }

    /// Every segment spans the whole usable series; for replaying a model on new data.
    pub fn whole(series: OhlcvSeries, cfg: &RunConfig) -> Result<Self> {
        let start = warmup_day(cfg);
        let last = series.n_days().saturating_sub(1);
        if last < start + 2 {
            return Err(Error::InsufficientData {
                needed: start + 3,
                available: series.n_days(),
            });
        }
        let range = (start, last);
        let segments = Segments {
            train: range,
            validation: range,
            test: range,
        };
        Self::with_segments(series, cfg, segments)
    }

    pub fn load(cfg: &RunConfig, base_dir: Option<&Path>) -> Result<Self> {
        Self::new(cfg.data.load(base_dir)?, cfg)
    }

    pub fn with_segments(series: OhlcvSeries, cfg: &RunConfig, segments: Segments) -> Result<Self> {
        let returns = ReturnsMatrix::from_series(&series);
        let t_days = series.n_days();
        let k = cfg.risk_window;
        let covariances = (0..t_days)
            .map(|t| {
                if t + 1 >= k + 1 && t < t_days {
                    rolling_covariance(&returns, t + 1, k).ok()
                } else {
                    None
                }
            })
            .collect::<Vec<_>>();
        let n = series.n_assets();
        let ew = WeightVector::uniform(n);
        let mut train_risk = Vec::new();
        for t in segments.train.0..=segments.train.1 {
            if let Some(c) = &covariances[t] {
                train_risk.push(short_term_risk(&ew, c, 0.0, cfg.metrics.risk_form)?.sigma_alpha);
            }
        }
        if train_risk.is_empty() {
            return Err(Error::DataSplitTooSmall {
                segment: "train",
                needed: k + 1,
                available: segments.train.1 + 1,
            });
        }
        let static_boundary = quantile(&train_risk, 0.5);
        Ok(Self {
            split_hash: segments.hash(&series),
            series,
            segments,
            static_boundary,
            covariances,
        })
    }

    pub fn covariance(&self, day: usize) -> Result<&CovarianceEstimate> {
        self.covariances
            .get(day)
            .and_then(Option::as_ref)
            .ok_or(Error::InsufficientHistory {
                needed: day + 1,
                available: self.covariances.len(),
            })
    }
}

/// First day from which a segment can trade.
pub fn warmup_day(cfg: &RunConfig) -> usize {
    (cfg.env.window + cfg.observer.history_len()).max(cfg.risk_window)
}

/// What happened inside one pipeline step, in order.
#[derive(Debug, Clone, Copy)]
pub enum PipelineEvent<'a> {
    Observe { day: usize, observation: &'a Observation },
    Reward { day: usize, reward: f64 },
    StoreTransition(&'a Transition),
    StoreRecord(&'a ObserverRecord),
    ObserverCall { day: usize, signal: &'a RiskSignal },
    RlCall { day: usize, action: &'a WeightVector },
    SolverCall { day: usize, result: &'a SolverResult },
    Compose { day: usize, action: &'a WeightVector },
    Execute { day: usize, action: &'a WeightVector, growth: f64 },
    RlUpdate { day: usize },
    ObserverUpdate { episode: usize },
    EpisodeEnd { episode: usize, score: f64 },
}

pub type Probe<'p> = &'p mut dyn FnMut(&PipelineEvent<'_>);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounters {
    pub observer_calls: u64,
    pub rl_calls: u64,
    pub solver_calls: u64,
    pub rl_updates: u64,
    pub observer_updates: u64,
    pub transitions: u64,
}

/// Per-step record of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub equity: Vec<f64>,
    pub growths: Vec<f64>,
    pub jsd: Vec<f64>,
    pub rewards: Vec<f64>,
    pub risk: Vec<f64>,
    pub adjustment: Vec<f64>,
}

enum Mode<'m> {
    Train {
        buffer: &'m mut ReplayBuffer,
        profile: &'m mut VecDeque<ObserverRecord>,
        profile_capacity: usize,
        episode: usize,
    },
    Eval,
}

/// Runs training and evaluation episodes for one variant and seed.
struct Runner<'a> {
    cfg: &'a RunConfig,
    data: &'a PreparedData,
    variant: &'a Variant,
    reward: RewardConfig,
    seed: u64,
    boundary: f64,
    counters: CallCounters,
}

impl Runner<'_> {
    fn episode(
        &mut self,
        agent: &mut Td3Agent,
        observer: &mut Option<Observer>,
        range: (usize, usize),
        mut mode: Mode<'_>,
        probe: Probe<'_>,
    ) -> Result<EpisodeLog> {
        let cfg = self.cfg;
        let tier = self.variant.tier;
        let mut env = TradingEnv::new(&self.data.series, cfg.env.clone())?;
        let mut obs = env.reset_range(range.0, range.1)?;
        if let Some(o) = observer.as_mut() {
            o.clear_history();
            for d in range.0.saturating_sub(o.warmup())..range.0 {
                o.push(&env.observation_at(d)?)?;
            }
        }
        let training = matches!(mode, Mode::Train { .. });
        let episode_tag = match mode {
            Mode::Train { episode, .. } => episode as u64 + 1,
            Mode::Eval => 0,
        };

        let mut log = EpisodeLog {
            equity: vec![cfg.env.c0],
            ..EpisodeLog::default()
        };
        let n = env.n_assets();
        let mut a_rl = WeightVector::uniform(n);
        let mut a_final = a_rl.clone();
        let mut signal = RiskSignal {
            sigma_s: self.boundary,
            v_m: vec![0.0; crate::env::MARKET_VECTOR_LEN],
        };
        let mut day = obs.day;
        log.risk.push(self.sigma_p(&a_final, day)?);
        log.adjustment.push(0.0);
        let mut outcome = env.step(&a_final)?;
        probe(&PipelineEvent::Execute {
            day,
            action: &a_final,
            growth: outcome.growth,
        });
        log.equity.push(env.state().capital);

        loop {
            let o_next = outcome.observation.clone();
            day = o_next.day;
            probe(&PipelineEvent::Observe {
                day,
                observation: &o_next,
            });
            let reward = per_step_reward(outcome.growth, &a_rl, &a_final, &self.reward)?;
            log.growths.push(outcome.growth);
            log.jsd.push(jensen_shannon(&a_rl, &a_final));
            log.rewards.push(reward);
            probe(&PipelineEvent::Reward { day, reward });

            if let Mode::Train {
                buffer,
                profile,
                profile_capacity,
                ..
            } = &mut mode
            {
                let transition = Transition {
                    o_prev: obs.clone(),
                    a_final: a_final.clone(),
                    a_rl: a_rl.clone(),
                    o_next: o_next.clone(),
                    reward,
                };
                probe(&PipelineEvent::StoreTransition(&transition));
                buffer.push(transition)?;
                self.counters.transitions += 1;
                if observer.is_some() {
                    let record = ObserverRecord {
                        o_prev: obs.clone(),
                        o_next: o_next.clone(),
                        sigma_s_prev: signal.sigma_s,
                        v_m_prev: signal.v_m.clone(),
                    };
                    probe(&PipelineEvent::StoreRecord(&record));
                    if profile.len() == *profile_capacity {
                        profile.pop_front();
                    }
                    profile.push_back(record);
                }
            }
            if outcome.done {
                break;
            }
            obs = o_next;

            if tier == Tier::Triple {
                let o = observer.as_mut().expect("triple tier has an observer");
                signal = o.observe(&obs)?;
                self.counters.observer_calls += 1;
                probe(&PipelineEvent::ObserverCall { day, signal: &signal });
            }

            a_rl = agent.select_action(&obs, training)?;
            self.counters.rl_calls += 1;
            probe(&PipelineEvent::RlCall { day, action: &a_rl });

            let mut adjustment = 0.0;
            a_final = if tier == Tier::Single {
                a_rl.clone()
            } else {
                let market: &[f64] = if tier == Tier::Triple { &signal.v_m } else { &[] };
                let problem = RiskControlProblem {
                    a_rl: &a_rl,
                    cov: self.data.covariance(day)?,
                    risk_boundary: signal.sigma_s,
                    market_vector: market,
                    risk_form: cfg.metrics.risk_form,
                };
                let solver_seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (episode_tag << 32) ^ day as u64;
                let result = propose_control(&problem, &cfg.solver, solver_seed)?;
                self.counters.solver_calls += 1;
                probe(&PipelineEvent::SolverCall { day, result: &result });
                adjustment = result.a_ctrl.iter().map(|c| c.abs()).sum();
                result.a_final
            };
            probe(&PipelineEvent::Compose { day, action: &a_final });

            if tier == Tier::Triple {
                env.set_market_vector(&signal.v_m);
            }
            log.risk.push(self.sigma_p(&a_final, day)?);
            log.adjustment.push(adjustment);
            outcome = env.step(&a_final)?;
            probe(&PipelineEvent::Execute {
                day,
                action: &a_final,
                growth: outcome.growth,
            });
            log.equity.push(env.state().capital);

            if let Mode::Train { buffer, .. } = &mode {
                let ready = cfg.td3.warmup.max(cfg.td3.batch_size);
                if buffer.len() >= ready {
                    agent.td3_update(buffer, cfg.td3.batch_size)?;
                    self.counters.rl_updates += 1;
                    probe(&PipelineEvent::RlUpdate { day });
                }
            }
        }
        Ok(log)
    }

    fn sigma_p(&self, w: &WeightVector, day: usize) -> Result<f64> {
        Ok(short_term_risk(
            w,
            self.data.covariance(day)?,
            self.cfg.metrics.sigma_beta,
            self.cfg.metrics.risk_form,
        )?
        .sigma_p)
    }

    fn score(&self, log: &EpisodeLog) -> Result<f64> {
        match self.cfg.selection {
            Selection::J => Ok(episode_reward(&log.growths, &log.jsd, self.cfg.env.c0, &self.reward)?.j),
            Selection::Sharpe => {
                Ok(PerformanceReport::from_run(log.equity.clone(), Vec::new(), &self.cfg.metrics)?.sharpe)
            }
        }
    }
}

/// Everything needed to replay a trained pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub variant: Variant,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub best_episode: usize,
    pub static_boundary: f64,
    pub agent: AgentCheckpoint,
    pub observer: Option<Observer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub train_j: f64,
    pub train_final_capital: f64,
    pub validation_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub curves: Vec<EpisodeStats>,
    pub counters: CallCounters,
    pub buffer_len: usize,
}

fn build_observer(cfg: &RunConfig, variant: &Variant, seed: u64) -> Result<Option<Observer>> {
    if variant.tier != Tier::Triple {
        return Ok(None);
    }
    Ok(match variant.observer {
        ObserverKind::Dc => Some(Observer::Dc(DcObserver::new(cfg.observer.dc(&cfg.metrics))?)),
        ObserverKind::Mlp => Some(Observer::Mlp(MlpObserver::new(
            cfg.env.window,
            cfg.observer.mlp(&cfg.metrics),
            seed ^ 0x0B5E_4FE4,
        )?)),
        ObserverKind::None => return Err(Error::InvalidConfig("triple tier needs an observer".into())),
    })
}

/// Trains one variant with one seed and keeps the best validation checkpoint.
pub fn train(
    cfg: &RunConfig,
    data: &PreparedData,
    variant: &Variant,
    seed: u64,
    probe: Probe<'_>,
) -> Result<TrainOutcome> {
    let n = data.series.n_assets();
    let obs_len = Observation::feature_len(cfg.env.window, n);
    let mut agent = Td3Agent::new(obs_len, n, cfg.td3.clone(), seed)?;
    let mut observer = build_observer(cfg, variant, seed)?;
    let mut buffer = ReplayBuffer::new(cfg.td3.buffer_capacity)?;
    let mut profile = VecDeque::new();
    let mut runner = Runner {
        cfg,
        data,
        variant,
        reward: variant.reward(&cfg.reward),
        seed,
        boundary: data.static_boundary,
        counters: CallCounters::default(),
    };

    let mut curves = Vec::with_capacity(cfg.max_episode);
    let mut best: Option<(f64, usize, AgentCheckpoint, Option<Observer>)> = None;
    for episode in 0..cfg.max_episode {
        let log = runner.episode(
            &mut agent,
            &mut observer,
            data.segments.train,
            Mode::Train {
                buffer: &mut buffer,
                profile: &mut profile,
                profile_capacity: cfg.observer.profile_capacity,
                episode,
            },
            &mut *probe,
        )?;
        if let Some(o) = observer.as_mut() {
            if (episode + 1) % cfg.observer.update_every == 0 && !profile.is_empty() {
                let records: Vec<ObserverRecord> = profile.iter().cloned().collect();
                o.update_profile(&records)?;
                runner.counters.observer_updates += 1;
                probe(&PipelineEvent::ObserverUpdate { episode });
            }
        }
        let train_j = episode_reward(&log.growths, &log.jsd, cfg.env.c0, &runner.reward)?.j;

        let mut eval_observer = observer.clone();
        let saved = runner.counters;
        let val = runner.episode(
            &mut agent,
            &mut eval_observer,
            data.segments.validation,
            Mode::Eval,
            &mut |_| {},
        )?;
        runner.counters = saved;
        let score = runner.score(&val)?;
        probe(&PipelineEvent::EpisodeEnd { episode, score });
        curves.push(EpisodeStats {
            episode,
            train_j,
            train_final_capital: *log.equity.last().expect("equity has entries"),
            validation_score: score,
        });
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, episode, agent.checkpoint(), observer.clone()));
        }
    }
    let (_, best_episode, checkpoint, best_observer) = best.expect("at least one episode");
    Ok(TrainOutcome {
        model: TrainedModel {
            variant: variant.clone(),
            seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            best_episode,
            static_boundary: data.static_boundary,
            agent: checkpoint,
            observer: best_observer,
        },
        curves,
        counters: runner.counters,
        buffer_len: buffer.len(),
    })
}

/// A deterministic pass over one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRun {
    pub report: PerformanceReport,
    /// `Σ|a_ctrl|` per executed day.
    pub adjustment: Vec<f64>,
    pub counters: CallCounters,
}

/// Replays a trained pipeline with exploration off.
pub fn backtest_model(model: &TrainedModel, data: &PreparedData, range: (usize, usize)) -> Result<BacktestRun> {
    let cfg = &model.config;
    let mut agent = Td3Agent::from_checkpoint(model.agent.clone())?;
    let mut observer = model.observer.clone();
    let mut runner = Runner {
        cfg,
        data,
        variant: &model.variant,
        reward: model.variant.reward(&cfg.reward),
        seed: model.seed,
        boundary: model.static_boundary,
        counters: CallCounters::default(),
    };
    let log = runner.episode(&mut agent, &mut observer, range, Mode::Eval, &mut |_| {})?;
    Ok(BacktestRun {
        report: PerformanceReport::from_run(log.equity, log.risk, &cfg.metrics)?,
        adjustment: log.adjustment,
        counters: runner.counters,
    })
}

/// Runs a baseline over `range`, deciding at each close from the relatives seen so far.
pub fn backtest_baseline(
    spec: &BaselineSpec,
    cfg: &RunConfig,
    data: &PreparedData,
    range: (usize, usize),
) -> Result<BacktestRun> {
    let mut env = TradingEnv::new(&data.series, cfg.env.clone())?;
    env.reset_range(range.0, range.1)?;
    let n = env.n_assets();
    let mut strategy = spec.build(n);
    let mut equity = vec![cfg.env.c0];
    let mut risk = Vec::new();
    loop {
        let day = env.state().day;
        let w = strategy.decide(env.relatives_through(day), n)?;
        risk.push(
            short_term_risk(
                &w,
                data.covariance(day)?,
                cfg.metrics.sigma_beta,
                cfg.metrics.risk_form,
            )?
            .sigma_p,
        );
        let out = env.step(&w)?;
        equity.push(env.state().capital);
        if out.done {
            break;
        }
    }
    let days = risk.len();
    Ok(BacktestRun {
        report: PerformanceReport::from_run(equity, risk, &cfg.metrics)?,
        adjustment: vec![0.0; days],
        counters: CallCounters::default(),
    })
}
