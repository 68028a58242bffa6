//! Market-data ingestion and daily variance proxies.
//!
//! Input schemas are fixed rather than sniffed:
//!
//! - OHLC: header `date,open,high,low,close`, ISO-8601 dates;
//! - intraday returns: header `date,return`, rows grouped by date;
//! - precomputed daily measures: header `date,rv,bv`;
//! - volatility series: header `index,value`.
//!
//! Rows that fail to parse or violate the bar invariants are rejected
//! individually and reported with their line number; only a header mismatch
//! fails the whole file. Calendar gaps are ignored: the series index is the
//! trading-day ordinal.

use crate::error::{Error, Result};
use crate::simulate::{PricePath, SeriesMeta, VolSeries};
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Fraction of dropped days above which the provenance carries a warning.
pub const DROP_WARNING_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcBar {
    pub fn new(date: NaiveDate, open: f64, high: f64, low: f64, close: f64) -> Result<Self> {
        let bar = Self {
            date,
            open,
            high,
            low,
            close,
        };
        bar.validate()?;
        Ok(bar)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("open", self.open), ("high", self.high), ("low", self.low), ("close", self.close)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Data(format!("{name} price {v} must be positive")));
            }
        }
        if self.low > self.open.min(self.close) {
            return Err(Error::Data(format!(
                "low {} exceeds min(open, close) = {}",
                self.low,
                self.open.min(self.close)
            )));
        }
        if self.high < self.open.max(self.close) {
            return Err(Error::Data(format!(
                "high {} is below max(open, close) = {}",
                self.high,
                self.open.max(self.close)
            )));
        }
        Ok(())
    }
}

/// Garman-Klass daily variance
/// `0.5 ln(high/low)^2 - (2 ln 2 - 1) ln(close/open)^2`.
///
/// Can be negative when the open-to-close move is large relative to the range.
pub fn garman_klass(bar: &OhlcBar) -> f64 {
    let hl = (bar.high / bar.low).ln();
    let co = (bar.close / bar.open).ln();
    0.5 * hl * hl - (2.0 * std::f64::consts::LN_2 - 1.0) * co * co
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayReturns {
    pub date: NaiveDate,
    pub returns: Vec<f64>,
}

pub fn realized_variance(day: &IntradayReturns) -> Result<f64> {
    if day.returns.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(day.returns.iter().map(|r| r * r).sum())
}

/// `(pi/2) sum_i |r_i| |r_{i+1}|`.
pub fn bipower_variation(day: &IntradayReturns) -> Result<f64> {
    if day.returns.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: day.returns.len(),
        });
    }
    let s: f64 = day.returns.windows(2).map(|w| w[0].abs() * w[1].abs()).sum();
    Ok(std::f64::consts::FRAC_PI_2 * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "epsilon", rename_all = "snake_case")]
pub enum CleaningPolicy {
    Drop,
    Floor(f64),
}

/// A rejected input row and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestProvenance {
    pub source: String,
    pub estimator: String,
    pub cleaning: CleaningPolicy,
    pub input_count: usize,
    pub dropped: Vec<usize>,
    pub floored: Vec<usize>,
    pub rejected_rows: Vec<RowRejection>,
    pub warnings: Vec<String>,
}

impl IngestProvenance {
    pub fn new(source: impl Into<String>, estimator: impl Into<String>, cleaning: CleaningPolicy) -> Self {
        Self {
            source: source.into(),
            estimator: estimator.into(),
            cleaning,
            input_count: 0,
            dropped: Vec::new(),
            floored: Vec::new(),
            rejected_rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn drop_count(&self) -> usize {
        self.dropped.len()
    }
}

/// Daily variances (ordered by date, `NaN` for missing) to a unit-step series.
///
/// Non-positive and missing values are dropped or floored according to
/// `cleaning`; the positions affected are recorded in the provenance.
pub fn to_vol_series(daily: &[f64], cleaning: CleaningPolicy, mut provenance: IngestProvenance) -> Result<VolSeries> {
    if let CleaningPolicy::Floor(eps) = cleaning {
        if !(eps > 0.0) {
            return Err(Error::param(format!("floor epsilon {eps} must be > 0")));
        }
    }
    provenance.cleaning = cleaning;
    provenance.input_count = daily.len();
    provenance.dropped.clear();
    provenance.floored.clear();
    let mut values = Vec::with_capacity(daily.len());
    for (i, &v) in daily.iter().enumerate() {
        if v > 0.0 && v.is_finite() {
            values.push(v);
            continue;
        }
        match cleaning {
            CleaningPolicy::Drop => provenance.dropped.push(i),
            CleaningPolicy::Floor(eps) => {
                provenance.floored.push(i);
                values.push(eps);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Data("no usable observations after cleaning".into()));
    }
    let bad = provenance.dropped.len() + provenance.floored.len();
    if daily.len() > 0 && bad as f64 > DROP_WARNING_FRACTION * daily.len() as f64 {
        provenance.warnings.push(format!(
            "{bad} of {} days were non-positive or missing",
            daily.len()
        ));
    }
    VolSeries::new(1.0, values, SeriesMeta::Ingested(provenance))
}

/// Bars read from a file along with the rows that were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcFile {
    pub bars: Vec<OhlcBar>,
    pub rejected: Vec<RowRejection>,
}

/// Per-day data read from an intraday file.
#[derive(Debug, Clone, PartialEq)]
pub enum IntradayData {
    Returns(Vec<IntradayReturns>),
    Measures(Vec<DailyMeasures>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyMeasures {
    pub date: NaiveDate,
    pub rv: f64,
    pub bv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntradayFile {
    pub data: IntradayData,
    pub rejected: Vec<RowRejection>,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let names: Vec<&str> = found.iter().map(str::trim).collect();
    if names.len() != expected.len() {
        return Err(Error::Data(format!(
            "header has {} columns {:?}, expected {:?}",
            names.len(),
            names,
            expected
        )));
    }
    for (i, (got, want)) in names.iter().zip(expected).enumerate() {
        if got != want {
            return Err(Error::Data(format!(
                "column {} is named '{got}', expected '{want}'",
                i + 1
            )));
        }
    }
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str) -> std::result::Result<&'a str, String> {
    rec.get(i).map(str::trim).ok_or_else(|| format!("missing column '{name}'"))
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date '{s}': {e}"))
}

fn parse_num(s: &str, name: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("column '{name}': '{s}' is not a number"))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn parse_ohlc<R: Read>(input: R) -> Result<OhlcFile> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &["date", "open", "high", "low", "close"])?;
    let mut bars = Vec::new();
    let mut rejected = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowRejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let parsed = (|| -> std::result::Result<OhlcBar, String> {
            if rec.len() != 5 {
                return Err(format!("expected 5 fields, found {}", rec.len()));
            }
            let date = parse_date(field(&rec, 0, "date")?)?;
            let open = parse_num(field(&rec, 1, "open")?, "open")?;
            let high = parse_num(field(&rec, 2, "high")?, "high")?;
            let low = parse_num(field(&rec, 3, "low")?, "low")?;
            let close = parse_num(field(&rec, 4, "close")?, "close")?;
            OhlcBar::new(date, open, high, low, close).map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(bar) => bars.push(bar),
            Err(reason) => rejected.push(RowRejection { line, reason }),
        }
    }
    Ok(OhlcFile { bars, rejected })
}

pub fn read_ohlc_csv(path: &Path) -> Result<OhlcFile> {
    parse_ohlc(std::fs::File::open(path)?)
}

pub fn parse_intraday<R: Read>(input: R) -> Result<IntradayFile> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    let measures = header.len() == 3;
    if measures {
        check_header(&header, &["date", "rv", "bv"])?;
    } else {
        check_header(&header, &["date", "return"])?;
    }
    let mut rejected = Vec::new();
    let mut days: Vec<IntradayReturns> = Vec::new();
    let mut daily: Vec<DailyMeasures> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowRejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let outcome = (|| -> std::result::Result<(), String> {
            if rec.len() != header.len() {
                return Err(format!("expected {} fields, found {}", header.len(), rec.len()));
            }
            let date = parse_date(field(&rec, 0, "date")?)?;
            if measures {
                let rv = parse_num(field(&rec, 1, "rv")?, "rv")?;
                let bv = parse_num(field(&rec, 2, "bv")?, "bv")?;
                if daily.last().is_some_and(|d| d.date >= date) {
                    return Err(format!("date {date} is not after the previous row"));
                }
                daily.push(DailyMeasures { date, rv, bv });
            } else {
                let r = parse_num(field(&rec, 1, "return")?, "return")?;
                if !r.is_finite() {
                    return Err(format!("return {r} is not finite"));
                }
                match days.last_mut() {
                    Some(d) if d.date == date => d.returns.push(r),
                    Some(d) if d.date > date => {
                        return Err(format!("date {date} appears after {}", d.date));
                    }
                    _ => days.push(IntradayReturns {
                        date,
                        returns: vec![r],
                    }),
                }
            }
            Ok(())
        })();
        if let Err(reason) = outcome {
            rejected.push(RowRejection { line, reason });
        }
    }
    let data = if measures {
        IntradayData::Measures(daily)
    } else {
        IntradayData::Returns(days)
    };
    Ok(IntradayFile { data, rejected })
}

pub fn read_intraday_csv(path: &Path) -> Result<IntradayFile> {
    parse_intraday(std::fs::File::open(path)?)
}

pub fn write_ohlc<W: Write>(out: W, bars: &[OhlcBar]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "open", "high", "low", "close"])?;
    for b in bars {
        w.write_record([
            b.date.format("%Y-%m-%d").to_string(),
            format!("{}", b.open),
            format!("{}", b.high),
            format!("{}", b.low),
            format!("{}", b.close),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `index,value` rows, index starting at 0.
pub fn write_series<W: Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(path: &Path, values: &[f64]) -> Result<()> {
    write_series(std::fs::File::create(path)?, values)
}

/// Reads an `index,value` file into a series with cell size `delta`.
pub fn parse_series<R: Read>(input: R, delta: f64, source: &str) -> Result<VolSeries> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &["index", "value"])?;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let v = rec
            .get(1)
            .ok_or_else(|| Error::Data(format!("line {line}: missing 'value'")))
            .and_then(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("line {line}: '{s}' is not a number")))
            })?;
        values.push(v);
    }
    VolSeries::new(
        delta,
        values,
        SeriesMeta::External {
            source: source.to_string(),
        },
    )
    .map_err(|e| match e {
        Error::NonPositive { index, value } => Error::Data(format!(
            "line {}: value {value} is not positive",
            index + 2
        )),
        other => other,
    })
}

pub fn read_series_csv(path: &Path, delta: f64) -> Result<VolSeries> {
    parse_series(std::fs::File::open(path)?, delta, &path.display().to_string())
}

/// Which daily proxy to build from intraday data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntradayEstimator {
    RealizedVariance,
    Bipower,
}

/// Garman-Klass series from an OHLC file.
pub fn ingest_ohlc(file: &OhlcFile, source: &str, cleaning: CleaningPolicy) -> Result<VolSeries> {
    let daily: Vec<f64> = file.bars.iter().map(garman_klass).collect();
    let mut prov = IngestProvenance::new(source, "garman_klass", cleaning);
    prov.rejected_rows = file.rejected.clone();
    to_vol_series(&daily, cleaning, prov)
}

/// Realized-variance or bipower series from an intraday file.
pub fn ingest_intraday(
    file: &IntradayFile,
    source: &str,
    estimator: IntradayEstimator,
    cleaning: CleaningPolicy,
) -> Result<VolSeries> {
    let name = match estimator {
        IntradayEstimator::RealizedVariance => "realized_variance",
        IntradayEstimator::Bipower => "bipower_variation",
    };
    let daily: Vec<f64> = match &file.data {
        IntradayData::Returns(days) => days
            .iter()
            .map(|d| match estimator {
                IntradayEstimator::RealizedVariance => realized_variance(d),
                IntradayEstimator::Bipower => bipower_variation(d),
            }
            .unwrap_or(f64::NAN))
            .collect(),
        IntradayData::Measures(rows) => rows
            .iter()
            .map(|d| match estimator {
                IntradayEstimator::RealizedVariance => d.rv,
                IntradayEstimator::Bipower => d.bv,
            })
            .collect(),
    };
    let mut prov = IngestProvenance::new(source, name, cleaning);
    prov.rejected_rows = file.rejected.clone();
    to_vol_series(&daily, cleaning, prov)
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut n = d + Duration::days(1);
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n += Duration::days(1);
    }
    n
}

/// Daily bars from a fine price path, `steps_per_bar` returns per day.
///
/// Open and close are the first and last prices of the day, high and low the
/// extremes over the fine grid; consecutive bars share the close/open price.
/// Dates run over weekdays from `start`.
pub fn ohlc_from_price_path(path: &PricePath, steps_per_bar: usize, start_price: f64, start: NaiveDate) -> Result<Vec<OhlcBar>> {
    if steps_per_bar == 0 || path.log_returns.len() % steps_per_bar != 0 {
        return Err(Error::param(format!(
            "{} returns do not split into bars of {steps_per_bar}",
            path.log_returns.len()
        )));
    }
    if !(start_price > 0.0) {
        return Err(Error::param("start price must be positive"));
    }
    let x = path.log_prices(start_price.ln());
    let mut date = start;
    while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date += Duration::days(1);
    }
    let mut bars = Vec::with_capacity(path.log_returns.len() / steps_per_bar);
    for k in 0..path.log_returns.len() / steps_per_bar {
        let day = &x[k * steps_per_bar..=(k + 1) * steps_per_bar];
        let hi = day.iter().cloned().fold(f64::MIN, f64::max);
        let lo = day.iter().cloned().fold(f64::MAX, f64::min);
        bars.push(OhlcBar::new(date, day[0].exp(), hi.exp(), lo.exp(), day[steps_per_bar].exp())?);
        date = next_weekday(date);
    }
    Ok(bars)
}
