use chrono::{DateTime, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use super::{LoadedSeries, Series};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default maximum bid-ask spread, in quote currency.
pub const DEFAULT_SPREAD_CAP: f64 = 5.0;

/// One best bid/offer observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct QuoteRecord<T> {
    pub timestamp: NaiveDateTime,
    pub bid: T,
    pub ask: T,
}

impl<T: Real> QuoteRecord<T> {
    pub fn new(timestamp: NaiveDateTime, bid: T, ask: T) -> Result<Self> {
        if !(bid.is_finite() && ask.is_finite() && bid > T::zero() && ask > T::zero()) {
            return Err(Error::InvalidSeries(format!("quote at {timestamp} needs positive finite bid/ask")));
        }
        Ok(Self { timestamp, bid, ask })
    }

    pub fn mid(&self) -> T {
        (self.bid + self.ask) / T::lit(2.0)
    }
}

/// Drops crossed quotes (`bid > ask`) and quotes whose spread is not below `spread_cap`.
pub fn clean_quotes<T: Real>(records: &[QuoteRecord<T>], spread_cap: T) -> Vec<QuoteRecord<T>> {
    records
        .iter()
        .filter(|r| r.bid <= r.ask && (r.ask - r.bid) < spread_cap)
        .copied()
        .collect()
}

/// Last mid-price per `interval` bucket, forward-filling empty buckets.
///
/// Buckets are aligned to multiples of `interval` since the Unix epoch, so a
/// 30-minute interval produces `:00`/`:30` bars. The output uses one time
/// unit per bucket; the calendar holds each bucket's start.
pub fn resample_last_quote<T: Real>(records: &[QuoteRecord<T>], interval: TimeDelta) -> Result<LoadedSeries<T>> {
    let width = interval.num_seconds();
    if width <= 0 {
        return Err(Error::Config("resampling interval must be at least one second".into()));
    }
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput("no quotes survived cleaning".into())),
    };
    let bucket_of = |ts: &NaiveDateTime| ts.and_utc().timestamp().div_euclid(width);
    let b0 = bucket_of(&first.timestamp);
    let b1 = bucket_of(&last.timestamp);
    if b1 < b0 {
        return Err(Error::InvalidSeries("quotes are not time-sorted".into()));
    }
    let n = usize::try_from(b1 - b0 + 1).map_err(|_| Error::InvalidSeries("bucket range overflow".into()))?;
    let mut slots: Vec<Option<T>> = vec![None; n];
    let mut prev_bucket = b0;
    for r in records {
        let b = bucket_of(&r.timestamp);
        if b < prev_bucket {
            return Err(Error::InvalidSeries(format!("quotes are not time-sorted at {}", r.timestamp)));
        }
        prev_bucket = b;
        slots[(b - b0) as usize] = Some(r.mid());
    }
    let mut values = Vec::with_capacity(n);
    let mut calendar = Vec::with_capacity(n);
    let mut carry: Option<T> = None;
    for (k, slot) in slots.into_iter().enumerate() {
        if slot.is_some() {
            carry = slot;
        }
        if let Some(v) = carry {
            values.push(v);
            let start = DateTime::from_timestamp((b0 + k as i64) * width, 0)
                .ok_or_else(|| Error::InvalidSeries("timestamp out of range".into()))?
                .naive_utc();
            calendar.push(start);
        }
    }
    if values.len() < 2 {
        return Err(Error::EmptyInput(format!("{} resampled bucket(s); need at least 2", values.len())));
    }
    let series = Series::from_values(values)?.with_time_unit(format!("{}s-bar", width));
    Ok(LoadedSeries { series, calendar: Some(calendar) })
}
