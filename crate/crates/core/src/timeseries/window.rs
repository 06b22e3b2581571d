use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::Series;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A calendar-month slice of a parent series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Window<T> {
    pub year: i32,
    pub month: u32,
    /// Index of the first observation in the parent series.
    pub start: usize,
    /// One past the last observation.
    pub end: usize,
    /// The slice, with times re-based to start at zero.
    pub series: Series<T>,
}

impl<T> Window<T> {
    pub fn tag(&self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }
}

/// Splits a series into non-overlapping calendar months.
///
/// Months holding fewer than two observations are dropped.
pub fn monthly_windows<T: Real>(series: &Series<T>, calendar: &[NaiveDateTime]) -> Result<Vec<Window<T>>> {
    if calendar.len() != series.len() {
        return Err(Error::LengthMismatch { expected: series.len(), actual: calendar.len() });
    }
    if calendar.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSeries("calendar must be non-decreasing".into()));
    }
    let key = |d: &NaiveDateTime| (d.year(), d.month());
    let mut out = Vec::new();
    let mut start = 0;
    while start < calendar.len() {
        let k = key(&calendar[start]);
        let end = start + calendar[start..].iter().take_while(|d| key(d) == k).count();
        if end - start >= 2 {
            let slice = series.slice(start, end)?.rebased();
            out.push(Window { year: k.0, month: k.1, start, end, series: slice });
        }
        start = end;
    }
    Ok(out)
}

/// Every calendar month present in `calendar`, in order.
pub(crate) fn months_present(calendar: &[NaiveDateTime]) -> Vec<(i32, u32)> {
    let mut months: Vec<(i32, u32)> = calendar.iter().map(|d| (d.year(), d.month())).collect();
    months.dedup();
    months
}
