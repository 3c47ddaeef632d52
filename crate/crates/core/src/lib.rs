//! Multi-agent portfolio risk management.
//!
//! Three cooperating agents run each trading day: a market observer suggests
//! a risk boundary and market vector, a TD3 allocator proposes portfolio
//! weights, and a risk-control solver adjusts those weights to respect the
//! boundary. The [`harness`] module trains and backtests the pipeline.

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod market_data;
pub mod metrics;
pub mod nn;
pub mod observer;
pub mod rl;
pub mod solver;

pub use error::{Error, Result};
pub use metrics::WeightVector;
