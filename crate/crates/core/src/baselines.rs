//! Online portfolio selection baselines: CRP, EG, OLMAR, PAMR, RMR and CORN.
//!
//! Each strategy sees day-major price relatives (row 0 is all ones) up to and
//! including today's close and returns the weights to hold until tomorrow's close.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::WeightVector;
use crate::solver::simplex_repair;

const WEISZFELD_ITERATIONS: usize = 200;
const WEISZFELD_TOLERANCE: f64 = 1e-9;
const CORN_ITERATIONS: usize = 500;

pub fn crp_weights(n: usize) -> WeightVector {
    WeightVector::uniform(n)
}

/// Exponentiated gradient: `w_i exp(η x_i / w·x)`, renormalized.
pub fn eg_update(w: &WeightVector, x: &[f64], eta: f64) -> Result<WeightVector> {
    let wx = w.dot(x)?;
    let raw: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(x)
        .map(|(wi, xi)| wi * (eta * xi / wx).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    WeightVector::new(raw.into_iter().map(|v| v / sum).collect())
}

/// Passive-aggressive step toward predicted relatives `x_tilde` with margin `epsilon`.
pub fn olmar_step(w: &WeightVector, x_tilde: &[f64], epsilon: f64) -> Result<WeightVector> {
    let n = x_tilde.len() as f64;
    let mean = x_tilde.iter().sum::<f64>() / n;
    let dev: Vec<f64> = x_tilde.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Ok(w.clone());
    }
    let lambda = ((epsilon - w.dot(x_tilde)?) / denom).max(0.0);
    if lambda == 0.0 {
        return Ok(w.clone());
    }
    let raw: Vec<f64> = w.as_slice().iter().zip(&dev).map(|(wi, d)| wi + lambda * d).collect();
    simplex_repair(&raw)
}

/// Ratios `p_{t-i} / p_t` for `i = window-1 .. 0` (oldest first) from relatives rows `..=t`.
fn price_ratios(history: &[f64], n: usize, window: usize) -> Result<Vec<Vec<f64>>> {
    let rows = history.len() / n;
    if window == 0 || rows < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: rows,
        });
    }
    let t = rows - 1;
    let mut out = vec![vec![1.0; n]; window];
    for i in 1..window {
        let x = &history[(t + 1 - i) * n..(t + 2 - i) * n];
        let (prev, cur) = out.split_at_mut(window - i);
        for ((p, c), xi) in prev[window - i - 1].iter_mut().zip(&cur[0]).zip(x) {
            *p = c / xi;
        }
    }
    Ok(out)
}

/// OLMAR: moving-average reversion prediction `MA_t / p_t` then [`olmar_step`].
pub fn olmar_update(w: &WeightVector, history: &[f64], n: usize, window: usize, epsilon: f64) -> Result<WeightVector> {
    if window < 2 {
        return Err(Error::InvalidConfig("olmar window must be at least 2".into()));
    }
    let ratios = price_ratios(history, n, window)?;
    let x_tilde: Vec<f64> = (0..n)
        .map(|i| ratios.iter().map(|r| r[i]).sum::<f64>() / window as f64)
        .collect();
    olmar_step(w, &x_tilde, epsilon)
}

/// PAMR: `τ = max(0, w·x - ε) / ||x - x̄||²`, `w - τ (x - x̄)`, projected.
pub fn pamr_update(w: &WeightVector, x: &[f64], epsilon: f64) -> Result<WeightVector> {
    let loss = (w.dot(x)? - epsilon).max(0.0);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if loss == 0.0 || denom == 0.0 {
        return Ok(w.clone());
    }
    let tau = loss / denom;
    let raw: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(x)
        .map(|(wi, xi)| wi - tau * (xi - mean))
        .collect();
    simplex_repair(&raw)
}

/// Geometric (L1) median by Weiszfeld iteration, started from the mean.
pub fn l1_median(points: &[Vec<f64>]) -> Vec<f64> {
    l1_median_trace(points).0
}

/// Median plus the iterate sequence.
pub fn l1_median_trace(points: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = points[0].len();
    let k = points.len() as f64;
    let mut y: Vec<f64> = (0..dim).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / k).collect();
    let mut trace = vec![y.clone()];
    for _ in 0..WEISZFELD_ITERATIONS {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut coincident = None;
        for p in points {
            let d = dist(p, &y);
            if d < 1e-15 {
                coincident = Some(p);
                continue;
            }
            for (nj, pj) in num.iter_mut().zip(p) {
                *nj += pj / d;
            }
            den += 1.0 / d;
        }
        if den == 0.0 {
            break;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        // Stop at a data point once no other point pulls hard enough to leave it.
        if let Some(p) = coincident {
            let pull: f64 = num
                .iter()
                .zip(p)
                .map(|(nj, pj)| (nj - pj * den).powi(2))
                .sum::<f64>()
                .sqrt();
            if pull <= 1.0 {
                y = p.clone();
                trace.push(y.clone());
                break;
            }
        }
        let moved = dist(&next, &y);
        y = next;
        trace.push(y.clone());
        if moved <= WEISZFELD_TOLERANCE {
            break;
        }
    }
    (y, trace)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// RMR: L1-median price prediction over the window, then [`olmar_step`].
pub fn rmr_update(w: &WeightVector, history: &[f64], n: usize, window: usize, epsilon: f64) -> Result<WeightVector> {
    let ratios = price_ratios(history, n, window)?;
    olmar_step(w, &l1_median(&ratios), epsilon)
}

/// CORN: log-optimal weights over days whose preceding window correlates with the latest one.
pub fn corn_weights(history: &[f64], n: usize, window: usize, rho: f64) -> Result<WeightVector> {
    let rows = history.len() / n;
    // usable relatives are rows 1..rows; need the current window plus one earlier window
    if window == 0 || rows < 2 * window + 1 {
        return Err(Error::InsufficientHistory {
            needed: 2 * window + 1,
            available: rows,
        });
    }
    let t = rows - 1;
    let current = &history[(t + 1 - window) * n..(t + 1) * n];
    let mut matched: Vec<&[f64]> = Vec::new();
    // window ending at day j, followed by day j + 1 <= t
    for j in window..t {
        let past = &history[(j + 1 - window) * n..(j + 1) * n];
        if pearson(past, current).is_some_and(|c| c >= rho) {
            matched.push(&history[(j + 1) * n..(j + 2) * n]);
        }
    }
    if matched.is_empty() {
        return Ok(WeightVector::uniform(n));
    }
    log_optimal(&matched, n)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let k = a.len() as f64;
    let ma = a.iter().sum::<f64>() / k;
    let mb = b.iter().sum::<f64>() / k;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

/// Projected gradient ascent on mean log wealth with a step below the inverse Lipschitz bound.
fn log_optimal(samples: &[&[f64]], n: usize) -> Result<WeightVector> {
    let lipschitz = samples
        .iter()
        .map(|x| {
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            norm2 / (min * min)
        })
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut b = WeightVector::uniform(n);
    let k = samples.len() as f64;
    for _ in 0..CORN_ITERATIONS {
        let mut grad = vec![0.0; n];
        for x in samples {
            let bx = b.dot(x)?;
            for (g, xi) in grad.iter_mut().zip(x.iter()) {
                *g += xi / bx / k;
            }
        }
        let raw: Vec<f64> = b.as_slice().iter().zip(&grad).map(|(bi, g)| bi + step * g).collect();
        b = simplex_repair(&raw)?;
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgParams {
    pub eta: f64,
}

impl Default for EgParams {
    fn default() -> Self {
        Self { eta: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReversionParams {
    pub window: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PamrParams {
    pub epsilon: f64,
}

impl Default for PamrParams {
    fn default() -> Self {
        Self { epsilon: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CornParams {
    pub window: usize,
    pub rho: f64,
}

impl Default for CornParams {
    fn default() -> Self {
        Self { window: 5, rho: 0.1 }
    }
}

/// Baseline selection in a run config, keyed by `name`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BaselineSpec {
    Crp,
    Eg(EgParams),
    Olmar(ReversionParams),
    Pamr(PamrParams),
    Rmr(ReversionParams),
    Corn(CornParams),
}

impl BaselineSpec {
    pub const NAMES: [&'static str; 6] = ["crp", "eg", "olmar", "pamr", "rmr", "corn"];

    /// Registry lookup with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "crp" => BaselineSpec::Crp,
            "eg" => BaselineSpec::Eg(EgParams::default()),
            "olmar" => BaselineSpec::Olmar(ReversionParams {
                window: 5,
                epsilon: 10.0,
            }),
            "pamr" => BaselineSpec::Pamr(PamrParams::default()),
            "rmr" => BaselineSpec::Rmr(ReversionParams {
                window: 5,
                epsilon: 5.0,
            }),
            "corn" => BaselineSpec::Corn(CornParams::default()),
            _ => return Err(Error::UnknownStrategy(name.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineSpec::Crp => "crp",
            BaselineSpec::Eg(_) => "eg",
            BaselineSpec::Olmar(_) => "olmar",
            BaselineSpec::Pamr(_) => "pamr",
            BaselineSpec::Rmr(_) => "rmr",
            BaselineSpec::Corn(_) => "corn",
        }
    }

    pub fn build(&self, n_assets: usize) -> Baseline {
        Baseline {
            spec: *self,
            weights: WeightVector::uniform(n_assets),
        }
    }
}

impl Default for ReversionParams {
    fn default() -> Self {
        Self {
            window: 5,
            epsilon: 10.0,
        }
    }
}

/// A baseline with its current portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub spec: BaselineSpec,
    weights: WeightVector,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        self.spec.name()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn reset(&mut self, n_assets: usize) {
        self.weights = WeightVector::uniform(n_assets);
    }

    /// Updates on relatives rows `..=t` and returns the portfolio to hold next.
    /// Strategies short of history keep their current weights.
    pub fn decide(&mut self, history: &[f64], n: usize) -> Result<WeightVector> {
        let rows = history.len() / n;
        if rows == 0 || history.len() % n != 0 || n != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: n,
            });
        }
        let x = &history[(rows - 1) * n..];
        let next = match self.spec {
            BaselineSpec::Crp => Ok(crp_weights(n)),
            BaselineSpec::Eg(p) => eg_update(&self.weights, x, p.eta),
            BaselineSpec::Olmar(p) => olmar_update(&self.weights, history, n, p.window, p.epsilon),
            BaselineSpec::Pamr(p) => pamr_update(&self.weights, x, p.epsilon),
            BaselineSpec::Rmr(p) => rmr_update(&self.weights, history, n, p.window, p.epsilon),
            BaselineSpec::Corn(p) => corn_weights(history, n, p.window, p.rho),
        };
        match next {
            Ok(w) => self.weights = w,
            Err(Error::InsufficientHistory { .. }) => {}
            Err(e) => return Err(e),
        }
        Ok(self.weights.clone())
    }
}
