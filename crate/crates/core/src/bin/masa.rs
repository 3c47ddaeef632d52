use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use masa_core::harness::{
    ablate, backtest_model, compare, emit_report, train, write_json, ComparisonReport, EpisodeStats, PreparedData,
    ReportFormat, RunConfig, TrainedModel, Variant,
};
use masa_core::harness::{BacktestRun, CallCounters, DataSource};
use masa_core::market_data::{synth_generate, write_long_csv, LoadConfig, SynthSpec};
use masa_core::Error;

#[derive(Parser)]
#[command(name = "masa", version, about = "Multi-agent portfolio allocation with risk control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmentArg {
    All,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured pipeline for the first seed and save the best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "masa-train")]
        out: PathBuf,
    },
    /// Replay a checkpoint over a price file.
    Backtest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        segment: SegmentArg,
    },
    /// Compare the configured strategies over all seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the tier and reward ablation matrix.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic price file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(Error),
    Data(Error),
    Other(Error),
}

impl Failure {
    fn classify(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e)
        } else if e.is_data_error() {
            Failure::Data(e)
        } else {
            Failure::Other(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::classify(e)
    }
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config_hash: &'a str,
    seed: u64,
    variant: &'a Variant,
    best_episode: usize,
    buffer_len: usize,
    counters: CallCounters,
    curves: &'a [EpisodeStats],
}

#[derive(Serialize)]
struct BacktestReport<'a> {
    config_hash: &'a str,
    strategy: &'a str,
    seed: u64,
    segment: (usize, usize),
    #[serde(flatten)]
    run: &'a BacktestRun,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MASA_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("data error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::from_path(path).map_err(Failure::Config)
}

fn prepare(cfg: &RunConfig, config_path: &Path) -> Result<PreparedData, Failure> {
    let series = cfg.data.load(config_path.parent()).map_err(Failure::Data)?;
    PreparedData::new(series, cfg).map_err(Failure::classify)
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let file = std::fs::File::create(path).map_err(Error::from)?;
    write_json(value, std::io::BufWriter::new(file))?;
    Ok(())
}

fn emit_all(report: &ComparisonReport, out: &Path) -> Result<(), Failure> {
    for format in ReportFormat::ALL {
        let path = emit_report(report, format, out)?;
        info!("wrote {}", path.display());
    }
    for row in &report.rows {
        println!(
            "{:<32} ar {:>9.4} mdd {:>7.4} sharpe {:>7.3} risk {:>10.6} p {:.4}",
            row.strategy, row.ar, row.mdd, row.sharpe, row.risk, row.p_value
        );
    }
    info!("finished in {:.1}s", report.elapsed_secs);
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train { config, out } => {
            let cfg = read_config(&config)?;
            let data = prepare(&cfg, &config)?;
            let variant = Variant::from_name("masa", &cfg).expect("masa is always a variant");
            let seed = cfg.seed_list()[0];
            let outcome = train(&cfg, &data, &variant, seed, &mut |_| {})?;
            write_json_file(&out.join("checkpoint.json"), &outcome.model)?;
            write_json_file(
                &out.join("training.json"),
                &TrainReport {
                    config_hash: &outcome.model.config_hash,
                    seed,
                    variant: &variant,
                    best_episode: outcome.model.best_episode,
                    buffer_len: outcome.buffer_len,
                    counters: outcome.counters,
                    curves: &outcome.curves,
                },
            )?;
            info!("best episode {} written to {}", outcome.model.best_episode, out.display());
            Ok(())
        }
        Command::Backtest {
            checkpoint,
            data,
            out,
            segment,
        } => {
            let text = std::fs::read_to_string(&checkpoint).map_err(|e| Failure::Config(e.into()))?;
            let model: TrainedModel = serde_json::from_str(&text).map_err(|e| Failure::Config(e.into()))?;
            let format = match &model.config.data {
                DataSource::File { format, .. } => format.clone(),
                DataSource::Synth(_) => LoadConfig::default(),
            };
            let series = masa_core::market_data::load_ohlcv(&data, &format).map_err(Failure::Data)?;
            let prepared = match segment {
                SegmentArg::All => PreparedData::whole(series, &model.config),
                SegmentArg::Test => PreparedData::new(series, &model.config),
            }
            .map_err(Failure::Data)?;
            let range = prepared.segments.test;
            let run = backtest_model(&model, &prepared, range)?;
            write_json_file(
                &out.join("backtest.json"),
                &BacktestReport {
                    config_hash: &model.config_hash,
                    strategy: &model.variant.name,
                    seed: model.seed,
                    segment: range,
                    run: &run,
                },
            )?;
            let r = &run.report;
            println!(
                "ar {:.4} mdd {:.4} sharpe {:.3} risk {:.6} over {} days",
                r.ar, r.mdd, r.sharpe, r.risk, r.t_days
            );
            Ok(())
        }
        Command::Compare { config, out } => {
            let cfg = read_config(&config)?;
            let data = prepare(&cfg, &config)?;
            emit_all(&compare(&cfg, &data)?, &out)
        }
        Command::Ablate { config, out } => {
            let cfg = read_config(&config)?;
            let data = prepare(&cfg, &config)?;
            emit_all(&ablate(&cfg, &data)?, &out)
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Failure::Config(e.into()))?;
            let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Failure::Config(e.into()))?;
            let series = synth_generate(&spec, spec.seed).map_err(Failure::classify)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
            }
            let file = std::fs::File::create(&out).map_err(Error::from)?;
            write_long_csv(&series, file)?;
            info!("wrote {} days x {} assets to {}", series.n_days(), series.n_assets(), out.display());
            Ok(())
        }
    }
}
