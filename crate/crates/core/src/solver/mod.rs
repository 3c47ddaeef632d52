//! Risk-control solver: nudges the allocator's weights toward lower short-term risk.

mod de;
mod simplex;

pub use de::{differential_evolution, DeConfig, DeResult};
pub use simplex::simplex_repair;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::CovarianceEstimate;
use crate::metrics::{strategy_risk, RiskForm, WeightVector};

/// Objective value given to infeasible candidates in hard mode, on top of their risk.
const INFEASIBLE_PENALTY: f64 = 1e6;

/// How the risk boundary enters the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Minimize risk plus deviation, stopping once the incumbent meets the boundary.
    #[default]
    Target,
    /// Minimize deviation among points that meet the boundary.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub optimizer: String,
    pub population: usize,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
    /// Objective evaluations per call.
    pub budget: usize,
    /// Deviation penalty μ; zero disables it.
    pub mu: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mode: BoundaryMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            optimizer: "de".into(),
            population: 20,
            f: 0.8,
            cr: 0.9,
            budget: 2000,
            mu: 0.1,
            mu_min: 0.01,
            mu_max: 1.0,
            mode: BoundaryMode::Target,
        }
    }
}

impl SolverConfig {
    pub fn de(&self) -> DeConfig {
        DeConfig {
            population: self.population,
            f: self.f,
            cr: self.cr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.optimizer != "de" {
            return Err(Error::InvalidConfig(format!("unknown solver optimizer {:?}", self.optimizer)));
        }
        self.de().validate()?;
        if self.budget < self.population {
            return Err(Error::BudgetTooSmall {
                budget: self.budget,
                population: self.population,
            });
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) || !(0.0 <= self.mu_min && self.mu_min <= self.mu_max) {
            return Err(Error::InvalidConfig("solver mu bounds are inconsistent".into()));
        }
        Ok(())
    }

    /// `μ (1 + v_m[0])` clamped to `[mu_min, mu_max]`; plain μ without a market vector.
    pub fn effective_mu(&self, market_vector: &[f64]) -> f64 {
        if self.mu == 0.0 {
            return 0.0;
        }
        match market_vector.first() {
            Some(trend) => (self.mu * (1.0 + trend)).clamp(self.mu_min, self.mu_max),
            None => self.mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskControlProblem<'a> {
    pub a_rl: &'a WeightVector,
    pub cov: &'a CovarianceEstimate,
    pub risk_boundary: f64,
    pub market_vector: &'a [f64],
    pub risk_form: RiskForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub a_ctrl: Vec<f64>,
    pub a_final: WeightVector,
    pub achieved_risk: f64,
    pub feasible: bool,
    pub evaluations: usize,
}

/// Computes the adjustment `a_ctrl` so that `a_final = a_rl + a_ctrl` lowers short-term risk.
///
/// In target mode the search minimizes `σ_α(A) / σ_α(a_rl) + μ ||A - a_rl||`.
/// Returns `a_ctrl = 0` when `a_rl` already meets the boundary.
pub fn propose_control(problem: &RiskControlProblem<'_>, config: &SolverConfig, seed: u64) -> Result<SolverResult> {
    let n = problem.a_rl.len();
    if problem.cov.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: problem.cov.dim(),
        });
    }
    if !(problem.risk_boundary >= 0.0) {
        return Err(Error::InvalidConfig("risk boundary must be non-negative".into()));
    }
    config.validate()?;
    let form = problem.risk_form;
    let boundary = problem.risk_boundary;
    let risk = |w: &[f64]| strategy_risk(w, problem.cov, form).unwrap_or(f64::INFINITY);

    let base_risk = risk(problem.a_rl.as_slice());
    if base_risk <= boundary {
        return Ok(SolverResult {
            a_ctrl: vec![0.0; n],
            a_final: problem.a_rl.clone(),
            achieved_risk: base_risk,
            feasible: true,
            evaluations: 1,
        });
    }

    let a_rl = problem.a_rl.as_slice();
    let deviation = |w: &[f64]| w.iter().zip(a_rl).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mu = config.effective_mu(problem.market_vector);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = [a_rl.to_vec()];
    let result = match config.mode {
        BoundaryMode::Target => de::run(
            |w| risk(w) / base_risk + mu * deviation(w),
            n,
            config.budget,
            &config.de(),
            &mut rng,
            &seeds,
            |w, _| risk(w) <= boundary,
        )?,
        BoundaryMode::Hard => de::run(
            |w| {
                let r = risk(w);
                if r <= boundary {
                    deviation(w)
                } else {
                    INFEASIBLE_PENALTY + r
                }
            },
            n,
            config.budget,
            &config.de(),
            &mut rng,
            &seeds,
            |_, _| false,
        )?,
    };

    let a_final = result.best;
    let achieved_risk = risk(a_final.as_slice());
    Ok(SolverResult {
        a_ctrl: a_final.as_slice().iter().zip(a_rl).map(|(f, r)| f - r).collect(),
        feasible: achieved_risk <= boundary,
        achieved_risk,
        a_final,
        evaluations: result.evaluations + 1,
    })
}
