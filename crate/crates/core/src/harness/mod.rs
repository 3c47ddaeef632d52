//! Training, backtesting, comparison and ablation runs, plus report output.

mod compare;
mod config;
mod pipeline;
mod report;

pub use compare::{
    ablate, ablation_rows, compare, run_rows, ComparisonReport, ComparisonRow, RowSpec, SeedMetrics,
    ABLATION_REFERENCE,
};
pub use config::{
    DataSource, ObserverKind, ObserverSettings, RunConfig, Segments, Selection, Splits, StrategyEntry, Tier,
};
pub use pipeline::{
    backtest_baseline, backtest_model, train, warmup_day, BacktestRun, CallCounters, EpisodeLog, EpisodeStats,
    PipelineEvent, PreparedData, Probe, TrainOutcome, TrainedModel, Variant,
};
pub use report::{emit_report, write_json, write_plotdata, write_table, ReportFormat, CSV_HEADER, PLOT_HEADER};
