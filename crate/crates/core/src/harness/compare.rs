use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ObserverKind, RunConfig, StrategyEntry, Tier};
use super::pipeline::{backtest_baseline, backtest_model, train, BacktestRun, PreparedData, Variant};
use crate::baselines::BaselineSpec;
use crate::error::{Error, Result};
use crate::metrics::wilcoxon_rank_sum;

/// One row of a comparison: a pipeline variant or a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowSpec {
    Pipeline(Variant),
    Baseline { name: String, spec: BaselineSpec },
}

impl RowSpec {
    pub fn name(&self) -> &str {
        match self {
            RowSpec::Pipeline(v) => &v.name,
            RowSpec::Baseline { name, .. } => name,
        }
    }

    pub fn resolve(entry: &StrategyEntry, cfg: &RunConfig) -> Result<Self> {
        match entry {
            StrategyEntry::Named(name) => {
                if let Some(v) = Variant::from_name(name, cfg) {
                    Ok(RowSpec::Pipeline(v))
                } else {
                    Ok(RowSpec::Baseline {
                        name: name.clone(),
                        spec: BaselineSpec::from_name(name)?,
                    })
                }
            }
            StrategyEntry::Baseline(spec) => Ok(RowSpec::Baseline {
                name: spec.name().to_string(),
                spec: *spec,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub ar: f64,
    pub mdd: f64,
    pub sharpe: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub spec: RowSpec,
    /// Seed means.
    pub ar: f64,
    pub mdd: f64,
    pub sharpe: f64,
    pub risk: f64,
    pub vol: f64,
    /// Two-sided Wilcoxon rank-sum p-value of pooled daily returns against the reference row.
    pub p_value: f64,
    pub significant: bool,
    pub split_hash: String,
    pub observer_calls: u64,
    pub solver_calls: u64,
    pub per_seed: Vec<SeedMetrics>,
    /// Seed-mean equity curve.
    pub equity_curve: Vec<f64>,
    pub risk_curve: Vec<f64>,
    pub adjustment_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config_hash: String,
    pub split_hash: String,
    pub seeds: Vec<u64>,
    pub reference: String,
    pub alpha: f64,
    pub test_segment: (usize, usize),
    /// Backtests executed to build the table.
    pub backtests: usize,
    /// Sorted by Sharpe ratio, best first.
    pub rows: Vec<ComparisonRow>,
    pub config: RunConfig,
    /// Wall-clock seconds; kept out of the JSON so reports stay reproducible.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl ComparisonReport {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == name)
    }
}

/// Trains (for pipeline rows) and backtests every `(row, seed)` pair on the test segment.
pub fn run_rows(cfg: &RunConfig, data: &PreparedData, rows: &[RowSpec], reference: &str) -> Result<ComparisonReport> {
    let started = std::time::Instant::now();
    if rows.is_empty() {
        return Err(Error::InvalidConfig("nothing to compare".into()));
    }
    if !rows.iter().any(|r| r.name() == reference) {
        return Err(Error::InvalidConfig(format!("reference row {reference:?} is not in the comparison")));
    }
    let seeds = cfg.seed_list();
    let jobs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|r| (0..seeds.len()).map(move |s| (r, s)))
        .collect();
    let test = data.segments.test;
    let results: Vec<Result<BacktestRun>> = jobs
        .par_iter()
        .map(|&(r, s)| match &rows[r] {
            RowSpec::Pipeline(variant) => {
                let trained = train(cfg, data, variant, seeds[s], &mut |_| {})?;
                let mut run = backtest_model(&trained.model, data, test)?;
                run.counters.observer_calls += trained.counters.observer_calls;
                run.counters.solver_calls += trained.counters.solver_calls;
                Ok(run)
            }
            RowSpec::Baseline { spec, .. } => backtest_baseline(spec, cfg, data, test),
        })
        .collect();
    let mut runs: Vec<Vec<BacktestRun>> = vec![Vec::with_capacity(seeds.len()); rows.len()];
    for ((r, _), res) in jobs.iter().zip(results) {
        runs[*r].push(res?);
    }

    let pooled = |i: usize| -> Vec<f64> {
        runs[i]
            .iter()
            .flat_map(|run| run.report.daily_returns.iter().copied())
            .collect()
    };
    let reference_idx = rows.iter().position(|r| r.name() == reference).expect("checked above");
    let reference_returns = pooled(reference_idx);

    let mut table = Vec::with_capacity(rows.len());
    for (i, spec) in rows.iter().enumerate() {
        let seed_runs = &runs[i];
        let k = seed_runs.len() as f64;
        let mean = |f: &dyn Fn(&BacktestRun) -> f64| seed_runs.iter().map(f).sum::<f64>() / k;
        let mean_curve = |f: &dyn Fn(&BacktestRun) -> &[f64]| -> Vec<f64> {
            let len = f(&seed_runs[0]).len();
            (0..len)
                .map(|d| seed_runs.iter().map(|run| f(run)[d]).sum::<f64>() / k)
                .collect()
        };
        let (p_value, significant) = match wilcoxon_rank_sum(&pooled(i), &reference_returns, cfg.alpha) {
            Ok(t) => (t.p_value, t.significant),
            Err(Error::DegenerateSamples) => (1.0, false),
            Err(e) => return Err(e),
        };
        table.push(ComparisonRow {
            strategy: spec.name().to_string(),
            spec: spec.clone(),
            ar: mean(&|r| r.report.ar),
            mdd: mean(&|r| r.report.mdd),
            sharpe: mean(&|r| r.report.sharpe),
            risk: mean(&|r| r.report.risk),
            vol: mean(&|r| r.report.vol),
            p_value,
            significant,
            split_hash: data.split_hash.clone(),
            observer_calls: seed_runs.iter().map(|r| r.counters.observer_calls).sum(),
            solver_calls: seed_runs.iter().map(|r| r.counters.solver_calls).sum(),
            per_seed: seed_runs
                .iter()
                .zip(&seeds)
                .map(|(r, &seed)| SeedMetrics {
                    seed,
                    ar: r.report.ar,
                    mdd: r.report.mdd,
                    sharpe: r.report.sharpe,
                    risk: r.report.risk,
                })
                .collect(),
            equity_curve: mean_curve(&|r| &r.report.equity_curve),
            risk_curve: mean_curve(&|r| &r.report.risk_curve),
            adjustment_curve: mean_curve(&|r| &r.adjustment),
        });
    }
    table.sort_by(|a, b| b.sharpe.total_cmp(&a.sharpe).then_with(|| a.strategy.cmp(&b.strategy)));

    Ok(ComparisonReport {
        config_hash: cfg.hash(),
        split_hash: data.split_hash.clone(),
        seeds,
        reference: reference.to_string(),
        alpha: cfg.alpha,
        test_segment: test,
        backtests: jobs.len(),
        rows: table,
        config: cfg.clone(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Backtests the configured strategy list over the configured seeds.
pub fn compare(cfg: &RunConfig, data: &PreparedData) -> Result<ComparisonReport> {
    if cfg.strategies.len() < 2 {
        return Err(Error::InvalidConfig("compare needs at least two strategies".into()));
    }
    let rows = cfg
        .strategies
        .iter()
        .map(|e| RowSpec::resolve(e, cfg))
        .collect::<Result<Vec<_>>>()?;
    run_rows(cfg, data, &rows, &cfg.reference)
}

/// Name of the TD3-only row in ablation reports; also their reference.
pub const ABLATION_REFERENCE: &str = "single";

/// Tier matrix: TD3 alone, RL plus solver, and each observer with and without the action reward.
pub fn ablation_rows(cfg: &RunConfig) -> Vec<RowSpec> {
    let lambda2 = if cfg.reward.lambda2 > 0.0 {
        cfg.reward.lambda2
    } else {
        crate::rl::RewardConfig::default().lambda2
    };
    let mut rows = vec![
        RowSpec::Pipeline(Variant {
            name: ABLATION_REFERENCE.into(),
            tier: Tier::Single,
            observer: ObserverKind::None,
            lambda2,
        }),
        RowSpec::Pipeline(Variant {
            name: "dual".into(),
            tier: Tier::Dual,
            observer: ObserverKind::None,
            lambda2,
        }),
    ];
    for (kind, label) in [(ObserverKind::Dc, "dc"), (ObserverKind::Mlp, "mlp")] {
        rows.push(RowSpec::Pipeline(Variant {
            name: format!("triple-{label}"),
            tier: Tier::Triple,
            observer: kind,
            lambda2,
        }));
        rows.push(RowSpec::Pipeline(Variant {
            name: format!("triple-{label}-no-action-reward"),
            tier: Tier::Triple,
            observer: kind,
            lambda2: 0.0,
        }));
    }
    rows
}

pub fn ablate(cfg: &RunConfig, data: &PreparedData) -> Result<ComparisonReport> {
    run_rows(cfg, data, &ablation_rows(cfg), ABLATION_REFERENCE)
}
