use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::OhlcvSeries;
use crate::error::{Error, Result};

/// One segment of a synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// Expected simple return per day.
    pub drift: f64,
    /// Daily log-return volatility.
    pub volatility: f64,
    /// Number of trading days.
    pub length: usize,
    /// Pairwise correlation of asset shocks, in `[0, 1)`.
    #[serde(default)]
    pub correlation: f64,
}

/// Regime-switching geometric random walk over N assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub assets: usize,
    pub regimes: Vec<Regime>,
    #[serde(default = "default_start_price")]
    pub start_price: f64,
    #[serde(default = "default_start_date")]
    pub start_date: String,
    /// Per-asset volatility multipliers; empty means all ones.
    #[serde(default)]
    pub volatility_scales: Vec<f64>,
    /// Per-asset additive drift; empty means all zero.
    #[serde(default)]
    pub drift_offsets: Vec<f64>,
    /// Per-asset multipliers of the regime drift; empty means all ones.
    #[serde(default)]
    pub betas: Vec<f64>,
    /// Seed used by the command-line front end.
    #[serde(default)]
    pub seed: u64,
}

fn default_start_price() -> f64 {
    100.0
}

fn default_start_date() -> String {
    "2015-01-05".into()
}

impl SynthSpec {
    pub fn total_days(&self) -> usize {
        1 + self.regimes.iter().map(|r| r.length).sum::<usize>()
    }

    fn beta(&self, asset: usize) -> f64 {
        self.betas.get(asset).copied().unwrap_or(1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.assets == 0 {
            return Err(Error::InvalidRegime("at least one asset required".into()));
        }
        if !(self.start_price.is_finite() && self.start_price > 0.0) {
            return Err(Error::InvalidRegime("start price must be positive".into()));
        }
        for (name, v) in [
            ("volatility_scales", &self.volatility_scales),
            ("drift_offsets", &self.drift_offsets),
            ("betas", &self.betas),
        ] {
            if !v.is_empty() && v.len() != self.assets {
                return Err(Error::InvalidRegime(format!(
                    "{name} has {} entries for {} assets",
                    v.len(),
                    self.assets
                )));
            }
        }
        if self.volatility_scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidRegime("negative volatility scale".into()));
        }
        if self.regimes.is_empty() {
            return Err(Error::InvalidRegime("no regimes".into()));
        }
        for (i, r) in self.regimes.iter().enumerate() {
            if !(r.volatility.is_finite() && r.volatility >= 0.0) {
                return Err(Error::InvalidRegime(format!("regime {i}: negative volatility")));
            }
            if r.length == 0 {
                return Err(Error::InvalidRegime(format!("regime {i}: zero length")));
            }
            if !(0.0..1.0).contains(&r.correlation) {
                return Err(Error::InvalidRegime(format!(
                    "regime {i}: correlation {} outside [0, 1)",
                    r.correlation
                )));
            }
            let worst = (0..self.assets)
                .map(|a| r.drift * self.beta(a) + self.drift_offsets.get(a).copied().unwrap_or(0.0))
                .fold(f64::INFINITY, f64::min);
            if !(worst > -1.0) || !r.drift.is_finite() {
                return Err(Error::InvalidRegime(format!("regime {i}: drift must exceed -100%")));
            }
        }
        NaiveDate::parse_from_str(&self.start_date, "%Y-%m-%d")
            .map_err(|_| Error::InvalidRegime(format!("bad start date {:?}", self.start_date)))?;
        Ok(())
    }
}

/// Generates the series; identical `(spec, seed)` give bit-identical output.
///
/// Each day, asset `i` moves by `(1 + beta_i drift + offset_i) * exp(s_i z_i - s_i^2 / 2)`
/// with `s_i = volatility * scale_i` and equicorrelated standard normal shocks `z`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<OhlcvSeries> {
    spec.validate()?;
    let n = spec.assets;
    let total = spec.total_days();
    let scale = |i: usize| spec.volatility_scales.get(i).copied().unwrap_or(1.0);
    let offset = |i: usize| spec.drift_offsets.get(i).copied().unwrap_or(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut close = Vec::with_capacity(total * n);
    let mut open = Vec::with_capacity(total * n);
    close.extend(std::iter::repeat(spec.start_price).take(n));
    open.extend(std::iter::repeat(spec.start_price).take(n));

    let mut shocks = vec![0.0; n];
    for regime in &spec.regimes {
        let common_w = regime.correlation.sqrt();
        let idio_w = (1.0 - regime.correlation).sqrt();
        for _ in 0..regime.length {
            let common: f64 = StandardNormal.sample(&mut rng);
            for z in shocks.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *z = common_w * common + idio_w * e;
            }
            let prev_start = close.len() - n;
            for i in 0..n {
                let prev = close[prev_start + i];
                let s = regime.volatility * scale(i);
                let mean = 1.0 + spec.beta(i) * regime.drift + offset(i);
                let factor = if s == 0.0 {
                    mean
                } else {
                    mean * (s * shocks[i] - 0.5 * s * s).exp()
                };
                open.push(prev);
                close.push(prev * factor);
            }
        }
    }
    let high: Vec<f64> = open.iter().zip(&close).map(|(o, c)| o.max(*c)).collect();
    let low: Vec<f64> = open.iter().zip(&close).map(|(o, c)| o.min(*c)).collect();

    let start = NaiveDate::parse_from_str(&spec.start_date, "%Y-%m-%d")
        .map_err(|_| Error::InvalidRegime("bad start date".into()))?;
    let dates = business_days(start, total);
    let names = (0..n).map(|i| format!("S{:02}", i + 1)).collect();
    OhlcvSeries::new(names, dates, open, high, low, close)
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(regimes: Vec<Regime>) -> SynthSpec {
        SynthSpec {
            assets: 3,
            regimes,
            start_price: 50.0,
            start_date: default_start_date(),
            volatility_scales: vec![],
            drift_offsets: vec![],
            betas: vec![],
            seed: 0,
        }
    }

    #[test]
    fn flat_regime_gives_constant_prices() {
        let s = synth_generate(
            &spec(vec![Regime {
                drift: 0.0,
                volatility: 0.0,
                length: 20,
                correlation: 0.0,
            }]),
            1,
        )
        .unwrap();
        assert_eq!(s.n_days(), 21);
        assert!(s.closes().iter().all(|&p| p == 50.0));
    }

    #[test]
    fn deterministic_drift_compounds() {
        let s = synth_generate(
            &spec(vec![Regime {
                drift: 0.001,
                volatility: 0.0,
                length: 10,
                correlation: 0.0,
            }]),
            9,
        )
        .unwrap();
        for t in 0..=10 {
            let expected = 50.0 * 1.001f64.powi(t as i32);
            assert!((s.close(t, 0) - expected).abs() / expected < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_series() {
        let sp = spec(vec![
            Regime {
                drift: 0.0005,
                volatility: 0.01,
                length: 50,
                correlation: 0.3,
            },
            Regime {
                drift: -0.002,
                volatility: 0.03,
                length: 30,
                correlation: 0.7,
            },
        ]);
        let a = synth_generate(&sp, 42).unwrap();
        let b = synth_generate(&sp, 42).unwrap();
        let c = synth_generate(&sp, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.closes(), c.closes());
    }

    #[test]
    fn rejects_bad_regimes() {
        let bad_vol = spec(vec![Regime {
            drift: 0.0,
            volatility: -0.1,
            length: 5,
            correlation: 0.0,
        }]);
        assert!(matches!(synth_generate(&bad_vol, 0), Err(Error::InvalidRegime(_))));
        let bad_len = spec(vec![Regime {
            drift: 0.0,
            volatility: 0.1,
            length: 0,
            correlation: 0.0,
        }]);
        assert!(matches!(synth_generate(&bad_len, 0), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn dates_skip_weekends() {
        let d = business_days(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 3);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2024, 1, 8).unwrap());
    }
}
