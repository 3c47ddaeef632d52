//! Price series, daily returns and trailing covariance estimates.
//!
//! Day indices run `0..T` over the close axis. The return of day `t`
//! (`t >= 1`) is `close(t) / close(t - 1) - 1`.

mod load;
mod synth;

pub use load::{load_ohlcv, write_long_csv, CsvLayout, LoadConfig};
pub use synth::{synth_generate, Regime, SynthSpec};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default trailing window for covariance estimates (one trading month).
pub const DEFAULT_COV_WINDOW: usize = 21;

/// Daily OHLCV prices for N assets over a shared date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries {
    asset_ids: Vec<String>,
    dates: Vec<NaiveDate>,
    // day-major, N values per day
    open: Vec<f64>,
    high: Vec<f64>,
    low: Vec<f64>,
    close: Vec<f64>,
}

impl OhlcvSeries {
    /// Builds a series from day-major price rows.
    pub fn new(
        asset_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        open: Vec<f64>,
        high: Vec<f64>,
        low: Vec<f64>,
        close: Vec<f64>,
    ) -> Result<Self> {
        let n = asset_ids.len();
        let t = dates.len();
        if n == 0 {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        if t < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                available: t,
            });
        }
        for field in [&open, &high, &low, &close] {
            if field.len() != n * t {
                return Err(Error::DimensionMismatch {
                    expected: n * t,
                    actual: field.len(),
                });
            }
            if let Some(pos) = field.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::NonPositivePrice { row: pos / n + 1 });
            }
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("dates must be strictly increasing".into()));
        }
        Ok(Self {
            asset_ids,
            dates,
            open,
            high,
            low,
            close,
        })
    }

    /// Close-only series; open, high and low are filled from the close.
    pub fn from_closes(
        asset_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        close: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            asset_ids,
            dates,
            close.clone(),
            close.clone(),
            close.clone(),
            close,
        )
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn close_row(&self, t: usize) -> &[f64] {
        let n = self.n_assets();
        &self.close[t * n..(t + 1) * n]
    }

    pub fn open_row(&self, t: usize) -> &[f64] {
        let n = self.n_assets();
        &self.open[t * n..(t + 1) * n]
    }

    pub fn high_row(&self, t: usize) -> &[f64] {
        let n = self.n_assets();
        &self.high[t * n..(t + 1) * n]
    }

    pub fn low_row(&self, t: usize) -> &[f64] {
        let n = self.n_assets();
        &self.low[t * n..(t + 1) * n]
    }

    pub fn close(&self, t: usize, asset: usize) -> f64 {
        self.close[t * self.n_assets() + asset]
    }

    /// Day-major close prices.
    pub fn closes(&self) -> &[f64] {
        &self.close
    }

    pub fn returns(&self) -> ReturnsMatrix {
        ReturnsMatrix::from_series(self)
    }

    /// Per-asset ratio `close(t) / close(t - 1)`.
    pub fn price_relatives(&self, t: usize) -> Result<Vec<f64>> {
        price_relatives(self, t)
    }

    /// Equal-weight index level, rebalanced daily, starting at 1.0 on day 0.
    pub fn equal_weight_index(&self) -> Vec<f64> {
        let n = self.n_assets() as f64;
        let mut level = 1.0;
        let mut out = Vec::with_capacity(self.n_days());
        out.push(level);
        for t in 1..self.n_days() {
            let prev = self.close_row(t - 1);
            let cur = self.close_row(t);
            let mean_rel: f64 = cur.iter().zip(prev).map(|(c, p)| c / p).sum::<f64>() / n;
            level *= mean_rel;
            out.push(level);
        }
        out
    }
}

/// Per-asset price relatives for day `t`, `1 <= t <= T - 1`.
pub fn price_relatives(series: &OhlcvSeries, t: usize) -> Result<Vec<f64>> {
    if t == 0 || t >= series.n_days() {
        return Err(Error::IndexOutOfRange {
            index: t,
            lo: 1,
            hi: series.n_days() - 1,
        });
    }
    Ok(series
        .close_row(t)
        .iter()
        .zip(series.close_row(t - 1))
        .map(|(c, p)| c / p)
        .collect())
}

/// Simple daily returns, one row per day `1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    n_assets: usize,
    // row r holds the returns of day r + 1
    values: Vec<f64>,
}

impl ReturnsMatrix {
    pub fn from_series(series: &OhlcvSeries) -> Self {
        let n = series.n_assets();
        let mut values = Vec::with_capacity(n * (series.n_days() - 1));
        for t in 1..series.n_days() {
            let cur = series.close_row(t);
            let prev = series.close_row(t - 1);
            values.extend(cur.iter().zip(prev).map(|(c, p)| c / p - 1.0));
        }
        Self { n_assets: n, values }
    }

    /// Builds directly from day-major rows, the first row being day 1.
    pub fn from_rows(n_assets: usize, values: Vec<f64>) -> Result<Self> {
        if n_assets == 0 || values.len() % n_assets != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_assets,
                actual: values.len(),
            });
        }
        Ok(Self { n_assets, values })
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    /// Number of return rows, `T - 1`.
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_assets
    }

    /// Returns of day `t`, `1 <= t <= T - 1`.
    pub fn day(&self, t: usize) -> &[f64] {
        let n = self.n_assets;
        &self.values[(t - 1) * n..t * n]
    }

    pub fn get(&self, t: usize, asset: usize) -> f64 {
        self.values[(t - 1) * self.n_assets + asset]
    }
}

/// Sample covariance of daily returns over a trailing window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    n: usize,
    /// Row-major N x N.
    matrix: Vec<f64>,
    /// Window length in days.
    pub k: usize,
    /// Anchor day; the window ends at day `t - 1`.
    pub t: usize,
}

impl CovarianceEstimate {
    /// Wraps an explicit row-major matrix.
    pub fn from_matrix(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            n,
            matrix,
            k: 0,
            t: 0,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            matrix: vec![0.0; n * n],
            k: 0,
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }

    /// `Σ x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Covariance (divisor `k - 1`) of the `k` return rows for days `t - k ..= t - 1`.
///
/// Only closes up to day `t - 1` are read. Valid anchors are `k + 1 ..= T`.
pub fn rolling_covariance(returns: &ReturnsMatrix, t: usize, k: usize) -> Result<CovarianceEstimate> {
    if k < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: k,
        });
    }
    let last_day = returns.n_rows(); // T - 1
    if t < k + 1 || t > last_day + 1 {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: t.saturating_sub(1).min(last_day),
        });
    }
    let n = returns.n_assets();
    let rows = &returns.values[(t - k - 1) * n..(t - 1) * n];
    let mut cov = sample_covariance(rows, n)?;
    cov.t = t;
    Ok(cov)
}

/// Sample covariance (divisor `rows - 1`) of day-major return rows.
pub fn sample_covariance(rows: &[f64], n: usize) -> Result<CovarianceEstimate> {
    if n == 0 || rows.len() % n != 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rows.len(),
        });
    }
    let k = rows.len() / n;
    if k < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: k,
        });
    }
    let mut mean = vec![0.0; n];
    for row in rows.chunks_exact(n) {
        for (m, r) in mean.iter_mut().zip(row) {
            *m += r;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    let mut matrix = vec![0.0; n * n];
    for row in rows.chunks_exact(n) {
        for i in 0..n {
            let di = row[i] - mean[i];
            for j in i..n {
                matrix[i * n + j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (k - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let v = matrix[i * n + j] / denom;
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
        }
    }
    Ok(CovarianceEstimate { n, matrix, k, t: 0 })
}
