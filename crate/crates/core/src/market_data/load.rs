use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::OhlcvSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLayout {
    /// One row per (date, asset) with OHLC columns.
    Long,
    /// `date` plus one close column per asset.
    Wide,
}

/// Column mapping for [`load_ohlcv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadConfig {
    pub layout: CsvLayout,
    pub delimiter: char,
    pub date_column: String,
    pub asset_column: String,
    pub open_column: String,
    pub high_column: String,
    pub low_column: String,
    pub close_column: String,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            layout: CsvLayout::Long,
            delimiter: ',',
            date_column: "date".into(),
            asset_column: "asset".into(),
            open_column: "open".into(),
            high_column: "high".into(),
            low_column: "low".into(),
            close_column: "close".into(),
        }
    }
}

impl LoadConfig {
    pub fn wide() -> Self {
        Self {
            layout: CsvLayout::Wide,
            ..Self::default()
        }
    }
}

type Bar = [f64; 4];

/// Loads a CSV file into an aligned series.
///
/// Assets are kept in order of first appearance. Only dates present for every
/// asset survive; nothing is imputed.
pub fn load_ohlcv(path: impl AsRef<Path>, config: &LoadConfig) -> Result<OhlcvSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    load_from_reader(file, config)
}

pub(crate) fn load_from_reader<R: std::io::Read>(reader: R, config: &LoadConfig) -> Result<OhlcvSeries> {
    if !config.delimiter.is_ascii() {
        return Err(Error::InvalidConfig(format!(
            "delimiter {:?} is not ascii",
            config.delimiter
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(config.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let mut assets: Vec<String> = Vec::new();
    let mut bars: Vec<BTreeMap<NaiveDate, Bar>> = Vec::new();

    match config.layout {
        CsvLayout::Long => {
            let date_col = column(&config.date_column)?;
            let asset_col = column(&config.asset_column)?;
            let cols = [
                column(&config.open_column)?,
                column(&config.high_column)?,
                column(&config.low_column)?,
                column(&config.close_column)?,
            ];
            for (i, record) in rdr.records().enumerate() {
                let row = i + 1;
                let record = record?;
                let date = parse_date(record.get(date_col).unwrap_or(""), row)?;
                let asset = record.get(asset_col).unwrap_or("").to_string();
                let mut bar = [0.0; 4];
                for (slot, &c) in bar.iter_mut().zip(&cols) {
                    *slot = parse_price(record.get(c).unwrap_or(""), row)?;
                }
                let idx = match assets.iter().position(|a| *a == asset) {
                    Some(idx) => idx,
                    None => {
                        assets.push(asset);
                        bars.push(BTreeMap::new());
                        assets.len() - 1
                    }
                };
                if bars[idx].insert(date, bar).is_some() {
                    return Err(Error::DuplicateRow { row });
                }
            }
        }
        CsvLayout::Wide => {
            let date_col = column(&config.date_column)?;
            let asset_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != date_col).collect();
            if asset_cols.is_empty() {
                return Err(Error::MissingColumn("<asset close columns>".into()));
            }
            assets = asset_cols.iter().map(|&c| headers[c].to_string()).collect();
            bars = vec![BTreeMap::new(); assets.len()];
            for (i, record) in rdr.records().enumerate() {
                let row = i + 1;
                let record = record?;
                let date = parse_date(record.get(date_col).unwrap_or(""), row)?;
                for (k, &c) in asset_cols.iter().enumerate() {
                    let cell = record.get(c).unwrap_or("");
                    if cell.is_empty() {
                        continue;
                    }
                    let close = parse_price(cell, row)?;
                    if bars[k].insert(date, [close; 4]).is_some() {
                        return Err(Error::DuplicateRow { row });
                    }
                }
            }
        }
    }

    if assets.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut common: BTreeSet<NaiveDate> = bars[0].keys().copied().collect();
    for b in &bars[1..] {
        common.retain(|d| b.contains_key(d));
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let n = assets.len();
    let mut fields: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(dates.len() * n));
    for d in &dates {
        for b in &bars {
            let bar = b[d];
            for (f, v) in fields.iter_mut().zip(bar) {
                f.push(v);
            }
        }
    }
    let [open, high, low, close] = fields;
    OhlcvSeries::new(assets, dates, open, high, low, close)
}

fn parse_date(s: &str, row: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::UnparseableDate {
        row,
        value: s.to_string(),
    })
}

fn parse_price(s: &str, row: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::UnparseableNumber {
        row,
        value: s.to_string(),
    })?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::NonPositivePrice { row });
    }
    Ok(v)
}

/// Writes a series as long-format CSV (`date,asset,open,high,low,close`).
pub fn write_long_csv<W: std::io::Write>(series: &OhlcvSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "asset", "open", "high", "low", "close"])?;
    for t in 0..series.n_days() {
        let date = series.dates()[t].format("%Y-%m-%d").to_string();
        for (i, asset) in series.asset_ids().iter().enumerate() {
            w.write_record([
                date.clone(),
                asset.clone(),
                series.open_row(t)[i].to_string(),
                series.high_row(t)[i].to_string(),
                series.low_row(t)[i].to_string(),
                series.close_row(t)[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
