//! Portfolio value, risk and performance metrics.

mod weights;
mod wilcoxon;

pub use weights::{WeightVector, SIMPLEX_TOLERANCE};
pub use wilcoxon::{wilcoxon_rank_sum, RankSumMethod, RankSumTest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::CovarianceEstimate;

pub const TRADING_DAYS_PER_YEAR: u32 = 252;

/// How the strategy risk `σ_α` is computed from weights and covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskForm {
    /// `‖Σ A‖₂`.
    #[default]
    NormOfProduct,
    /// `sqrt(Aᵀ Σ A)`.
    Quadratic,
}

/// Short-term risk split into strategy and market parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma_p: f64,
}

/// Capital after re-valuing `capital` held in `weights` by per-asset price relatives.
pub fn portfolio_value(weights: &WeightVector, capital: f64, relatives: &[f64]) -> Result<f64> {
    Ok(capital * weights.dot(relatives)?)
}

/// Strategy risk `σ_α` of arbitrary (not necessarily feasible) weights.
pub fn strategy_risk(weights: &[f64], cov: &CovarianceEstimate, form: RiskForm) -> Result<f64> {
    let n = cov.dim();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    let product = cov.mul_vec(weights);
    Ok(match form {
        RiskForm::NormOfProduct => product.iter().map(|v| v * v).sum::<f64>().sqrt(),
        // clamp tiny negative quadratic forms from rounding
        RiskForm::Quadratic => weights
            .iter()
            .zip(&product)
            .map(|(w, p)| w * p)
            .sum::<f64>()
            .max(0.0)
            .sqrt(),
    })
}

pub fn short_term_risk(
    weights: &WeightVector,
    cov: &CovarianceEstimate,
    sigma_beta: f64,
    form: RiskForm,
) -> Result<RiskBreakdown> {
    let sigma_alpha = strategy_risk(weights.as_slice(), cov, form)?;
    Ok(RiskBreakdown {
        sigma_alpha,
        sigma_beta,
        sigma_p: sigma_beta + sigma_alpha,
    })
}

/// Annualized volatility of daily returns, `sqrt(252 / n · Σ (r - r̄)²)`
/// where `n` is the number of return observations.
pub fn long_term_volatility(daily_returns: &[f64], days_per_year: u32) -> Result<f64> {
    if daily_returns.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    if daily_returns.iter().all(|r| *r == daily_returns[0]) {
        return Ok(0.0);
    }
    let n = daily_returns.len() as f64;
    let mean = daily_returns.iter().sum::<f64>() / n;
    let ss: f64 = daily_returns.iter().map(|r| (r - mean).powi(2)).sum();
    Ok((days_per_year as f64 / n * ss).sqrt())
}

pub fn sharpe_ratio(annual_return: f64, risk_free: f64, volatility: f64) -> Result<f64> {
    if volatility == 0.0 || !volatility.is_finite() {
        return Err(Error::ZeroVolatility);
    }
    Ok((annual_return - risk_free) / volatility)
}

/// Geometric annualization `(C_last / C_0)^(days_per_year / (len - 1)) - 1`.
pub fn annual_return(equity_curve: &[f64], days_per_year: u32) -> Result<f64> {
    if equity_curve.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: equity_curve.len(),
        });
    }
    let growth = equity_curve[equity_curve.len() - 1] / equity_curve[0];
    let years = (equity_curve.len() - 1) as f64 / days_per_year as f64;
    Ok(growth.powf(1.0 / years) - 1.0)
}

/// Largest peak-to-trough loss as a fraction of the peak.
pub fn max_drawdown(equity_curve: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &c in equity_curve {
        peak = peak.max(c);
        worst = worst.max((peak - c) / peak);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub risk_free_rate: f64,
    pub sigma_beta: f64,
    pub days_per_year: u32,
    pub risk_form: RiskForm,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            risk_free_rate: 0.0,
            sigma_beta: 0.0,
            days_per_year: TRADING_DAYS_PER_YEAR,
            risk_form: RiskForm::NormOfProduct,
        }
    }
}

/// Metrics of one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub ar: f64,
    pub mdd: f64,
    /// Zero when the run has no volatility.
    pub sharpe: f64,
    /// Mean short-term risk `σ_p` over the run.
    pub risk: f64,
    pub vol: f64,
    pub t_days: usize,
    pub mean_daily_return: f64,
    pub risk_free_rate: f64,
    pub equity_curve: Vec<f64>,
    pub daily_returns: Vec<f64>,
    /// Per-day `σ_p` of the executed weights.
    pub risk_curve: Vec<f64>,
}

impl PerformanceReport {
    /// `risk_curve` holds one `σ_p` per executed step (may be empty).
    pub fn from_run(equity_curve: Vec<f64>, risk_curve: Vec<f64>, config: &MetricsConfig) -> Result<Self> {
        if equity_curve.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                available: equity_curve.len(),
            });
        }
        if equity_curve.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::NonFiniteInput);
        }
        let daily_returns: Vec<f64> = equity_curve.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let ar = annual_return(&equity_curve, config.days_per_year)?;
        let vol = long_term_volatility(&daily_returns, config.days_per_year)?;
        let sharpe = sharpe_ratio(ar, config.risk_free_rate, vol).unwrap_or(0.0);
        let risk = if risk_curve.is_empty() {
            0.0
        } else {
            risk_curve.iter().sum::<f64>() / risk_curve.len() as f64
        };
        let mean_daily_return = daily_returns.iter().sum::<f64>() / daily_returns.len() as f64;
        Ok(Self {
            ar,
            mdd: max_drawdown(&equity_curve),
            sharpe,
            risk,
            vol,
            t_days: equity_curve.len(),
            mean_daily_return,
            risk_free_rate: config.risk_free_rate,
            equity_curve,
            daily_returns,
            risk_curve,
        })
    }

    pub const CSV_HEADER: [&'static str; 6] = ["ar", "mdd", "sharpe", "risk", "vol", "t_days"];

    pub fn csv_row(&self) -> [String; 6] {
        [
            self.ar.to_string(),
            self.mdd.to_string(),
            self.sharpe.to_string(),
            self.risk.to_string(),
            self.vol.to_string(),
            self.t_days.to_string(),
        ]
    }
}
