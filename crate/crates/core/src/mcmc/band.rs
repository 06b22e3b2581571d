use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PosteriorEnsemble;
use crate::error::{Error, Result};
use crate::inference::FitResult;
use crate::model::DriftModel;
use crate::scalar::Real;
use crate::timeseries::Series;

/// Points in the default band grid.
pub const DEFAULT_GRID_POINTS: usize = 200;

/// Potential curves on a price grid: MLE curve and pointwise credible intervals.
///
/// Every curve is zero at `P = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PotentialBand<T> {
    pub order: usize,
    pub grid: Vec<T>,
    pub v_mle: Vec<T>,
    pub lo68: Vec<T>,
    pub hi68: Vec<T>,
    pub lo95: Vec<T>,
    pub hi95: Vec<T>,
    /// Smallest observed price of the underlying series, when known.
    #[serde(default)]
    pub observed_min: Option<T>,
}

impl<T: Real> PotentialBand<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn with_observed_min(mut self, p: T) -> Self {
        self.observed_min = Some(p);
        self
    }

    /// Fraction of grid points where the MLE curve leaves the 68% band.
    pub fn mle_outside_68(&self) -> f64 {
        if self.grid.is_empty() {
            return 0.0;
        }
        let out = (0..self.len()).filter(|&k| self.v_mle[k] < self.lo68[k] || self.v_mle[k] > self.hi68[k]).count();
        out as f64 / self.len() as f64
    }

    /// Checks the pointwise ordering `lo95 ≤ lo68 ≤ hi68 ≤ hi95`.
    pub fn is_nested(&self) -> bool {
        (0..self.len()).all(|k| self.lo95[k] <= self.lo68[k] && self.lo68[k] <= self.hi68[k] && self.hi68[k] <= self.hi95[k])
    }
}

/// Equidistant grid on `[0.9·min, 1.1·max]` of the series values.
pub fn default_grid<T: Real>(series: &Series<T>, points: usize) -> Vec<T> {
    let (lo, hi) = (series.min_value(), series.max_value());
    let tenth = T::lit(0.1);
    let (a, b) = (lo - tenth * lo.abs(), hi + tenth * hi.abs());
    match points {
        0 => Vec::new(),
        1 => vec![(a + b) / T::lit(2.0)],
        _ => {
            let step = (b - a) / T::from_count(points - 1);
            (0..points).map(|k| if k + 1 == points { b } else { a + step * T::from_count(k) }).collect()
        }
    }
}

/// Linear-interpolation percentile of ascending `sorted` at `p ∈ [0, 1]`.
pub fn percentile<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let f = T::lit(h - i as f64);
    sorted[i] + f * (sorted[i + 1] - sorted[i])
}

/// Pointwise 68% (`[16, 84]`) and 95% (`[2.5, 97.5]`) percentile bands of
/// the draws' potentials, plus the MLE potential.
pub fn potential_band<T: Real>(ensemble: &PosteriorEnsemble<T>, grid: &[T], mle: &FitResult<T>) -> Result<PotentialBand<T>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("band grid is empty".into()));
    }
    if grid.iter().any(|p| !p.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("band grid must be finite and sorted".into()));
    }
    if ensemble.is_empty() {
        return Err(Error::EmptyInput("no posterior draws".into()));
    }
    if mle.order != ensemble.order {
        return Err(Error::Config(format!("MLE order {} differs from ensemble order {}", mle.order, ensemble.order)));
    }
    let models: Vec<DriftModel<T>> = ensemble.draws.iter().map(|d| DriftModel::from_phi(d)).collect::<Result<_>>()?;
    let mle_model = mle.model();
    let rows: Vec<[T; 5]> = grid
        .par_iter()
        .map(|&p| {
            let mut v: Vec<T> = models.iter().map(|m| m.potential(p)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let (l68, h68) = (percentile(&v, 0.16), percentile(&v, 0.84));
            let (l95, h95) = (percentile(&v, 0.025).min(l68), percentile(&v, 0.975).max(h68));
            [mle_model.potential(p), l68, h68, l95, h95]
        })
        .collect();
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<T>>();
    let band = PotentialBand {
        order: ensemble.order,
        grid: grid.to_vec(),
        v_mle: col(0),
        lo68: col(1),
        hi68: col(2),
        lo95: col(3),
        hi95: col(4),
        observed_min: None,
    };
    debug_assert!(band.is_nested());
    Ok(band)
}
