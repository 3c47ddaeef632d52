#![allow(dead_code)]

use masa_core::harness::{DataSource, RunConfig, StrategyEntry};
use masa_core::market_data::{Regime, SynthSpec};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = x.iter().sum();
    x.into_iter().map(|v| v / s).collect()
}

/// Row-major `B^T B / n` for a random `n x n` matrix `B`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let b: Vec<f64> = (0..n * n).map(|_| normal(rng) * scale).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>() / n as f64;
        }
    }
    m
}

pub fn norm_of_product(cov: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    (0..n)
        .map(|i| (0..n).map(|j| cov[i * n + j] * w[j]).sum::<f64>().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Projection onto the simplex by trying every support set.
pub fn kkt_projection(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        let mut ok = true;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                x[i] = v[i] - tau;
                ok &= x[i] >= -1e-15;
            } else {
                ok &= v[i] - tau <= 1e-15;
            }
        }
        if ok {
            let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, x));
            }
        }
    }
    best.expect("some support satisfies the KKT conditions").1
}

pub fn mdd_all_pairs(curve: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..curve.len() {
        for j in i + 1..curve.len() {
            worst = worst.max((curve[i] - curve[j]) / curve[i]);
        }
    }
    worst
}

/// Two-sided exact rank-sum p-value by listing every assignment of ranks to sample a.
pub fn rank_sum_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total = pooled.len();
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&u| u < v).count() as f64;
            let equal = pooled.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let n = a.len();
    let w: f64 = ranks[..n].iter().sum();
    let mean = n as f64 * (total as f64 + 1.0) / 2.0;
    let observed = (w - mean).abs();
    let (mut extreme, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let s: f64 = (0..total).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        count += 1;
        if (s - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / count as f64
}

/// Covariance with divisor `k - 1` by explicit mean then cross-product passes.
pub fn two_pass_covariance(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.len();
    let n = rows[0].len();
    let mean: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in rows {
                s += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
            out[i * n + j] = s / (k as f64 - 1.0);
        }
    }
    out
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

pub fn jsd_oracle(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

pub fn regime(drift: f64, volatility: f64, length: usize, correlation: f64) -> Regime {
    Regime {
        drift,
        volatility,
        length,
        correlation,
    }
}

/// Calm market followed by a high-volatility crash, repeated once.
pub fn two_regime_spec() -> SynthSpec {
    SynthSpec {
        assets: 5,
        regimes: vec![
            regime(0.0008, 0.008, 250, 0.3),
            regime(-0.003, 0.025, 125, 0.6),
            regime(0.0008, 0.008, 150, 0.3),
            regime(-0.003, 0.025, 225, 0.6),
        ],
        start_price: 100.0,
        start_date: "2015-01-05".into(),
        volatility_scales: vec![0.5, 0.8, 1.0, 1.4, 2.0],
        drift_offsets: vec![],
        betas: vec![0.4, 0.7, 1.0, 1.4, 2.0],
        seed: 7,
    }
}

/// Small configuration that trains in well under a second per episode.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig {
        data: DataSource::Synth(SynthSpec {
            assets: 3,
            regimes: vec![regime(0.0005, 0.01, 150, 0.3), regime(-0.002, 0.02, 150, 0.5)],
            start_price: 100.0,
            start_date: "2018-01-01".into(),
            volatility_scales: vec![],
            drift_offsets: vec![],
            betas: vec![],
            seed: 3,
        }),
        max_episode: 2,
        n_seeds: 1,
        ..RunConfig::default()
    };
    cfg.td3.hidden = vec![16, 16];
    cfg.td3.warmup = 64;
    cfg.td3.batch_size = 32;
    cfg.solver.budget = 200;
    cfg.observer.hidden = vec![8];
    cfg.strategies = vec![StrategyEntry::Named("masa".into()), StrategyEntry::Named("crp".into())];
    cfg
}

use masa_core::nn::{Activation, DenseNet};

/// Random net with at most `max_layers` layers of at most `max_units` units, all parameters randomized.
pub fn random_net<R: Rng>(rng: &mut R, max_layers: usize, max_units: usize) -> DenseNet {
    let layers = rng.random_range(1..=max_layers);
    let mut sizes = vec![rng.random_range(1..=max_units)];
    for _ in 0..layers {
        sizes.push(rng.random_range(1..=max_units));
    }
    let acts = [Activation::Relu, Activation::Tanh, Activation::Linear];
    let hidden = acts[rng.random_range(0..acts.len())];
    let outs = [Activation::Tanh, Activation::Linear, Activation::Softmax];
    let output = outs[rng.random_range(0..outs.len())];
    let mut net = DenseNet::new(&sizes, hidden, output, rng).unwrap();
    for p in net.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    net
}

/// Largest relative error between backprop and central differences over every
/// parameter and input, for the loss `g · net(x)`. Entries below 1e-5 in
/// magnitude are measured against 1e-5, since differencing at h = 1e-5 carries
/// roundoff near 1e-10.
pub fn gradient_error(net: &DenseNet, x: &[f64], g: &[f64], h: f64) -> f64 {
    let (_, tape) = net.forward(x).unwrap();
    let grads = net.backward(&tape, g).unwrap();
    let loss = |n: &DenseNet, input: &[f64]| -> f64 {
        n.predict(input).unwrap().iter().zip(g).map(|(a, b)| a * b).sum()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-5);
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..net.parameter_count() {
        let p0 = net.params()[i];
        probe.params_mut()[i] = p0 + h;
        let up = loss(&probe, x);
        probe.params_mut()[i] = p0 - h;
        let down = loss(&probe, x);
        probe.params_mut()[i] = p0;
        worst = worst.max(rel(grads.params[i], (up - down) / (2.0 * h)));
    }
    let mut xi = x.to_vec();
    for i in 0..x.len() {
        xi[i] = x[i] + h;
        let up = loss(net, &xi);
        xi[i] = x[i] - h;
        let down = loss(net, &xi);
        xi[i] = x[i];
        worst = worst.max(rel(grads.input[i], (up - down) / (2.0 * h)));
    }
    worst
}

use masa_core::market_data::CovarianceEstimate;
use masa_core::metrics::{RiskForm, WeightVector};
use masa_core::solver::{propose_control, RiskControlProblem, SolverConfig, SolverResult};

pub fn solve(a_rl: &[f64], cov: &[f64], sigma_s: f64, config: &SolverConfig, seed: u64) -> SolverResult {
    let n = a_rl.len();
    let a = WeightVector::new(a_rl.to_vec()).unwrap();
    let c = CovarianceEstimate::from_matrix(n, cov.to_vec()).unwrap();
    let problem = RiskControlProblem {
        a_rl: &a,
        cov: &c,
        risk_boundary: sigma_s,
        market_vector: &[],
        risk_form: RiskForm::NormOfProduct,
    };
    propose_control(&problem, config, seed).unwrap()
}

/// Smallest `‖Σ w‖₂` over `samples` flat Dirichlet draws plus the simplex vertices.
pub fn brute_force_min_risk<R: Rng>(rng: &mut R, cov: &[f64], n: usize, samples: usize) -> f64 {
    let mut best = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            norm_of_product(cov, &e)
        })
        .fold(f64::INFINITY, f64::min);
    let mut w = vec![0.0; n];
    for _ in 0..samples {
        let mut s = 0.0;
        for x in w.iter_mut() {
            *x = Exp1.sample(rng);
            s += *x;
        }
        for x in w.iter_mut() {
            *x /= s;
        }
        best = best.min(norm_of_product(cov, &w));
    }
    best
}

use masa_core::env::Observation;
use masa_core::harness::{PipelineEvent, Tier};
use masa_core::observer::{ObserverRecord, RiskSignal};
use masa_core::rl::Transition;

/// Owned copy of a pipeline event.
#[derive(Debug, Clone)]
pub enum Event {
    Observe(usize, Observation),
    Reward(usize, f64),
    StoreTransition(Transition),
    StoreRecord(ObserverRecord),
    ObserverCall(usize, RiskSignal),
    RlCall(usize, WeightVector),
    SolverCall(usize, SolverResult),
    Compose(usize, WeightVector),
    Execute(usize, WeightVector, f64),
    RlUpdate(usize),
    ObserverUpdate(usize),
    EpisodeEnd(usize),
}

impl Event {
    pub fn from_probe(e: &PipelineEvent<'_>) -> Self {
        match *e {
            PipelineEvent::Observe { day, observation } => Event::Observe(day, observation.clone()),
            PipelineEvent::Reward { day, reward } => Event::Reward(day, reward),
            PipelineEvent::StoreTransition(t) => Event::StoreTransition(t.clone()),
            PipelineEvent::StoreRecord(r) => Event::StoreRecord(r.clone()),
            PipelineEvent::ObserverCall { day, signal } => Event::ObserverCall(day, signal.clone()),
            PipelineEvent::RlCall { day, action } => Event::RlCall(day, action.clone()),
            PipelineEvent::SolverCall { day, result } => Event::SolverCall(day, result.clone()),
            PipelineEvent::Compose { day, action } => Event::Compose(day, action.clone()),
            PipelineEvent::Execute { day, action, growth } => Event::Execute(day, action.clone(), growth),
            PipelineEvent::RlUpdate { day } => Event::RlUpdate(day),
            PipelineEvent::ObserverUpdate { episode } => Event::ObserverUpdate(episode),
            PipelineEvent::EpisodeEnd { episode, .. } => Event::EpisodeEnd(episode),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Event::Observe(..) => "observe",
            Event::Reward(..) => "reward",
            Event::StoreTransition(..) => "store-transition",
            Event::StoreRecord(..) => "store-record",
            Event::ObserverCall(..) => "observer",
            Event::RlCall(..) => "rl",
            Event::SolverCall(..) => "solver",
            Event::Compose(..) => "compose",
            Event::Execute(..) => "execute",
            Event::RlUpdate(..) => "rl-update",
            Event::ObserverUpdate(..) => "observer-update",
            Event::EpisodeEnd(..) => "episode-end",
        }
    }
}

/// What a conforming event stream contained.
#[derive(Debug, Default, Clone, Copy)]
pub struct ConformanceSummary {
    pub episodes: usize,
    pub steps: usize,
    pub transitions: usize,
    pub records: usize,
    pub observer_calls: usize,
    pub solver_calls: usize,
}

struct Cursor<'e> {
    events: &'e [Event],
    i: usize,
}

impl<'e> Cursor<'e> {
    fn next(&mut self, want: &str) -> Result<&'e Event, String> {
        let e = self.events.get(self.i).ok_or_else(|| format!("stream ended, expected {want}"))?;
        self.i += 1;
        if e.label() != want {
            return Err(format!("event {}: expected {want}, found {}", self.i - 1, e.label()));
        }
        Ok(e)
    }
}

/// Walks the training event stream and checks step order and buffer tuple contents.
pub fn check_conformance(events: &[Event], tier: Tier, boundary: f64) -> Result<ConformanceSummary, String> {
    let mut s = ConformanceSummary::default();
    let has_observer = tier == Tier::Triple;
    let mut cur = Cursor { events, i: 0 };
    let fail = |what: &str, day: usize| Err(format!("{what} mismatch on day {day}"));

    while events.len() > cur.i {
        let Event::Execute(first_day, a0, _) = cur.next("execute")? else { unreachable!() };
        s.episodes += 1;
        let n = a0.len();
        let mut last_final = a0.clone();
        let mut last_rl = WeightVector::uniform(n);
        let mut signal = RiskSignal {
            sigma_s: boundary,
            v_m: vec![0.0; 3],
        };
        let mut prev_obs: Option<Observation> = None;
        let exec_day = *first_day;
        loop {
            let Event::Observe(day, obs) = cur.next("observe")? else { unreachable!() };
            let (day, obs) = (*day, obs.clone());
            let Event::Reward(_, reward) = cur.next("reward")? else { unreachable!() };
            let reward = *reward;
            let Event::StoreTransition(t) = cur.next("store-transition")? else { unreachable!() };
            match &prev_obs {
                Some(p) if &t.o_prev != p => return fail("o_prev", day),
                None if t.o_prev.day != exec_day => return fail("o_prev", day),
                _ => {}
            }
            if t.a_final != last_final || t.a_rl != last_rl || t.o_next != obs || t.reward != reward {
                return fail("transition", day);
            }
            s.transitions += 1;
            if has_observer {
                let Event::StoreRecord(r) = cur.next("store-record")? else { unreachable!() };
                if r.o_prev != t.o_prev || r.o_next != obs || r.sigma_s_prev != signal.sigma_s || r.v_m_prev != signal.v_m {
                    return fail("record", day);
                }
                s.records += 1;
            }
            prev_obs = Some(obs.clone());
            match events.get(cur.i) {
                Some(Event::ObserverUpdate(_)) => {
                    cur.next("observer-update")?;
                    cur.next("episode-end")?;
                    break;
                }
                Some(Event::EpisodeEnd(_)) => {
                    cur.next("episode-end")?;
                    break;
                }
                _ => {}
            }
            if has_observer {
                let Event::ObserverCall(d, sig) = cur.next("observer")? else { unreachable!() };
                if *d != day {
                    return fail("observer day", day);
                }
                signal = sig.clone();
                s.observer_calls += 1;
            }
            let Event::RlCall(_, a_rl) = cur.next("rl")? else { unreachable!() };
            last_rl = a_rl.clone();
            let composed = if tier == Tier::Single {
                last_rl.clone()
            } else {
                let Event::SolverCall(_, r) = cur.next("solver")? else { unreachable!() };
                s.solver_calls += 1;
                for ((f, a), c) in r.a_final.as_slice().iter().zip(last_rl.as_slice()).zip(&r.a_ctrl) {
                    if (f - (a + c)).abs() > 1e-12 {
                        return fail("a_rl + a_ctrl", day);
                    }
                }
                r.a_final.clone()
            };
            let Event::Compose(_, a) = cur.next("compose")? else { unreachable!() };
            if *a != composed {
                return fail("compose", day);
            }
            let Event::Execute(d, a, _) = cur.next("execute")? else { unreachable!() };
            if *a != composed || *d != day {
                return fail("execute", day);
            }
            last_final = a.clone();
            s.steps += 1;
            if let Some(Event::RlUpdate(_)) = events.get(cur.i) {
                cur.next("rl-update")?;
            }
        }
    }
    Ok(s)
}
