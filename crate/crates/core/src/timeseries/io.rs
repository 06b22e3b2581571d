//! Delimited-file readers and writers.
//!
//! * price-csv: header `time,price` (real-valued times) or `date,price`
//!   (ISO-8601 dates, unit time steps in row order).
//! * quote-csv: header `timestamp,bid,ask`, cleaned and resampled.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeDelta};

use super::quotes::{clean_quotes, resample_last_quote, QuoteRecord, DEFAULT_SPREAD_CAP};
use super::Series;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default bar length for resampled quotes.
pub const DEFAULT_BAR_MINUTES: i64 = 30;

/// Declared layout of an input file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesFormat {
    PriceCsv,
    QuoteCsv { spread_cap: f64, interval: TimeDelta },
}

impl SeriesFormat {
    /// Quote input with the default spread cap and 30-minute bars.
    pub fn quotes_default() -> Self {
        Self::quotes(DEFAULT_SPREAD_CAP, DEFAULT_BAR_MINUTES)
    }

    pub fn quotes(spread_cap: f64, bar_minutes: i64) -> Self {
        SeriesFormat::QuoteCsv { spread_cap, interval: TimeDelta::minutes(bar_minutes) }
    }

    /// Picks the format from a header line.
    pub fn detect(header: &str) -> Option<Self> {
        let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
        match cols.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["time", "price"] | ["date", "price"] => Some(SeriesFormat::PriceCsv),
            ["timestamp", "bid", "ask"] => Some(Self::quotes_default()),
            _ => None,
        }
    }
}

/// A series together with the calendar stamp of each observation, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries<T> {
    pub series: Series<T>,
    pub calendar: Option<Vec<NaiveDateTime>>,
}

/// Reads a series file in the given format.
pub fn load_series<T: Real>(path: impl AsRef<Path>, format: SeriesFormat) -> Result<LoadedSeries<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut loaded = parse_series(file, format)?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        loaded.series.label = stem.to_string();
    }
    Ok(loaded)
}

/// Parses series data from any reader.
pub fn parse_series<T: Real, R: Read>(reader: R, format: SeriesFormat) -> Result<LoadedSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput("file has no header".into()));
    }
    let cols: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    match format {
        SeriesFormat::PriceCsv => parse_prices(&mut rdr, &cols),
        SeriesFormat::QuoteCsv { spread_cap, interval } => {
            if cols != ["timestamp", "bid", "ask"] {
                return Err(Error::Parse { line: 1, message: format!("expected header timestamp,bid,ask, got {}", cols.join(",")) });
            }
            let mut quotes = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let line = i + 2;
                let rec = rec.map_err(|e| csv_error(e, line))?;
                let timestamp = parse_datetime(field(&rec, 0, line)?, line)?;
                let bid: T = parse_number(field(&rec, 1, line)?, line)?;
                let ask: T = parse_number(field(&rec, 2, line)?, line)?;
                let q = QuoteRecord::new(timestamp, bid, ask).map_err(|e| Error::Parse { line, message: e.to_string() })?;
                quotes.push(q);
            }
            if quotes.is_empty() {
                return Err(Error::EmptyInput("no quote rows".into()));
            }
            let cleaned = clean_quotes(&quotes, T::lit(spread_cap));
            resample_last_quote(&cleaned, interval)
        }
    }
}

fn parse_prices<T: Real, R: Read>(rdr: &mut csv::Reader<R>, cols: &[String]) -> Result<LoadedSeries<T>> {
    let dated = match cols {
        [a, b] if a == "date" && b == "price" => true,
        [a, b] if a == "time" && b == "price" => false,
        _ => {
            return Err(Error::Parse { line: 1, message: format!("expected header time,price or date,price, got {}", cols.join(",")) })
        }
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut calendar = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, got {}", rec.len()) });
        }
        if dated {
            calendar.push(parse_datetime(&rec[0], line)?);
            times.push(T::from_count(i));
        } else {
            times.push(parse_number(&rec[0], line)?);
        }
        values.push(parse_number(&rec[1], line)?);
    }
    if values.len() < 2 {
        return Err(Error::EmptyInput(format!("{} data row(s); need at least 2", values.len())));
    }
    if dated {
        if let Some(i) = calendar.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Parse { line: i + 3, message: "dates must be non-decreasing".into() });
        }
    }
    let series = Series::new(times, values).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    let series = if dated { series.with_time_unit("row") } else { series };
    Ok(LoadedSeries { series, calendar: dated.then_some(calendar) })
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, line: usize) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| Error::Parse { line, message: format!("missing field {}", idx + 1) })
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
    Error::Parse { line, message: e.to_string() }
}

fn parse_number<T: Real>(s: &str, line: usize) -> Result<T> {
    let x: f64 = s.parse().map_err(|_| Error::Parse { line, message: format!("not a number: {s:?}") })?;
    if !x.is_finite() {
        return Err(Error::Parse { line, message: format!("non-finite number: {s:?}") });
    }
    T::from_f64(x).ok_or_else(|| Error::Parse { line, message: format!("number out of range: {s:?}") })
}

/// ISO-8601 date or date-time; offsets are dropped and the local clock time kept.
pub(crate) fn parse_datetime(s: &str, line: usize) -> Result<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.naive_local())
        .map_err(|_| Error::Parse { line, message: format!("not an ISO-8601 date/time: {s:?}") })
}

/// Writes `time,price` rows, or `date,price` when a calendar is supplied.
pub fn write_price_csv<T: Real, W: Write>(mut out: W, series: &Series<T>, calendar: Option<&[NaiveDateTime]>) -> Result<()> {
    match calendar {
        Some(cal) => {
            if cal.len() != series.len() {
                return Err(Error::LengthMismatch { expected: series.len(), actual: cal.len() });
            }
            writeln!(out, "date,price")?;
            for (stamp, v) in cal.iter().zip(series.values()) {
                if stamp.time() == chrono::NaiveTime::MIN {
                    writeln!(out, "{},{}", stamp.date(), v)?;
                } else {
                    writeln!(out, "{},{}", stamp.format("%Y-%m-%dT%H:%M:%S"), v)?;
                }
            }
        }
        None => {
            writeln!(out, "time,price")?;
            for (t, v) in series.iter() {
                writeln!(out, "{t},{v}")?;
            }
        }
    }
    Ok(())
}

/// Writes several paths as `path_id,time,value` rows.
pub fn write_long_csv<T: Real, W: Write>(mut out: W, paths: &[Series<T>]) -> Result<()> {
    writeln!(out, "path_id,time,value")?;
    for (id, s) in paths.iter().enumerate() {
        for (t, v) in s.iter() {
            writeln!(out, "{id},{t},{v}")?;
        }
    }
    Ok(())
}
