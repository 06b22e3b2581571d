//! Observation series and their ingestion.

mod io;
mod quotes;
mod window;

pub use io::{load_series, parse_series, write_long_csv, write_price_csv, LoadedSeries, SeriesFormat, DEFAULT_BAR_MINUTES};
pub use quotes::{clean_quotes, resample_last_quote, QuoteRecord, DEFAULT_SPREAD_CAP};
pub use window::{monthly_windows, Window};
pub(crate) use window::months_present;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered `(time, value)` observations with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Series<T> {
    times: Vec<T>,
    values: Vec<T>,
    pub label: String,
    pub time_unit: String,
}

impl<T: Real> Series<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch { expected: times.len(), actual: values.len() });
        }
        if times.len() < 2 {
            return Err(Error::InvalidSeries(format!("need at least 2 observations, got {}", times.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite time at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSeries(format!("times not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { times, values, label: String::new(), time_unit: String::from("step") })
    }

    /// Unit-spaced times `0, 1, 2, …`.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        let times = (0..values.len()).map(T::from_count).collect();
        Self::new(times, values)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: a series holds at least two points.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Number of transitions, `len - 1`.
    pub fn transitions(&self) -> usize {
        self.len() - 1
    }

    /// Sub-series over `start..end` (end exclusive).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.len() || start >= end {
            return Err(Error::InvalidSeries(format!("bad slice {start}..{end} of {}", self.len())));
        }
        let s = Self::new(self.times[start..end].to_vec(), self.values[start..end].to_vec())?;
        Ok(s.with_label(self.label.clone()).with_time_unit(self.time_unit.clone()))
    }

    /// Same values with times shifted so the first observation sits at zero.
    pub fn rebased(&self) -> Self {
        let t0 = self.times[0];
        Self {
            times: self.times.iter().map(|&t| t - t0).collect(),
            values: self.values.clone(),
            label: self.label.clone(),
            time_unit: self.time_unit.clone(),
        }
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(Series::<f64>::new(vec![0.0], vec![1.0]).is_err());
        assert!(Series::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Series::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(Series::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn slice_and_rebase() {
        let s = Series::from_values(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = s.slice(1, 3).unwrap();
        assert_eq!(t.times(), &[1.0, 2.0]);
        assert_eq!(t.rebased().times(), &[0.0, 1.0]);
        assert!(s.slice(2, 3).is_err());
    }
}
