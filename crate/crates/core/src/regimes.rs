//! Regime labels per window: stable fixed point, growth, stagnation,
//! decline, or noise.
//!
//! The chosen order decides the family: `q = 2` is a stable fixed point,
//! `q ∈ {3, 4}` is noise. For `q = 1` the 68% band of `V(P)` above the
//! lowest observed price decides the direction: a band above zero means a
//! force pulling the price down (decline), below zero means growth, and a
//! band touching zero means stagnation.

use std::fmt;
use std::io::Write;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{select_order_with, FitOptions, ModelSelection, DEFAULT_Q_MAX};
use crate::mcmc::{default_grid, diagnostics, potential_band, sample_posterior_at, McmcConfig, PosteriorEnsemble, PotentialBand, DEFAULT_GRID_POINTS};
use crate::model::{check_order, Stability, MAX_ORDER};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::timeseries::{monthly_windows, months_present, Series};

/// Default share of evaluation points at which the 68% band must exclude zero.
pub const DEFAULT_EXCLUSION_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    StableFP,
    Growth,
    Stagnation,
    Decline,
    Noise,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::StableFP => "StableFP",
            Regime::Growth => "Growth",
            Regime::Stagnation => "Stagnation",
            Regime::Decline => "Decline",
            Regime::Noise => "Noise",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

/// Where the 68% band sits relative to the zero horizontal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    /// Grid points above the smallest observed price.
    pub evaluation_points: usize,
    /// Share of evaluation points with the whole 68% band above zero.
    pub above_fraction: f64,
    pub below_fraction: f64,
    /// Side on which the band excludes zero, if it does at the threshold.
    pub excludes_zero: Option<Side>,
}

impl BandSummary {
    pub fn of<T: Real>(band: &PotentialBand<T>, threshold: f64) -> Self {
        let mut idx: Vec<usize> = match band.observed_min {
            Some(m) => (0..band.len()).filter(|&k| band.grid[k] > m).collect(),
            None => (0..band.len()).collect(),
        };
        if idx.is_empty() {
            idx = (0..band.len()).collect();
        }
        let n = idx.len().max(1) as f64;
        let above = idx.iter().filter(|&&k| band.lo68[k] > T::zero()).count() as f64 / n;
        let below = idx.iter().filter(|&&k| band.hi68[k] < T::zero()).count() as f64 / n;
        let excludes_zero = if above >= threshold {
            Some(Side::Above)
        } else if below >= threshold {
            Some(Side::Below)
        } else {
            None
        };
        Self { evaluation_points: idx.len(), above_fraction: above, below_fraction: below, excludes_zero }
    }
}

/// Label of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegimeLabel<T> {
    pub tag: String,
    pub year: Option<i32>,
    pub month: Option<u32>,
    pub regime: Regime,
    pub order: usize,
    pub band: BandSummary,
    /// Stable fixed point of the fitted `q = 2` drift inside the band grid.
    pub well_price: Option<T>,
    /// MLE curve leaves the 68% band too often.
    pub multimodal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_EXCLUSION_THRESHOLD }
    }
}

/// Maps a window's selected order and band to a regime.
pub fn classify_window<T: Real>(
    tag: impl Into<String>,
    selection: &ModelSelection<T>,
    band: &PotentialBand<T>,
    config: &ClassifyConfig,
) -> Result<RegimeLabel<T>> {
    let q = selection.chosen_order;
    check_order(q)?;
    if band.order != q {
        return Err(Error::Config(format!("band has order {}, selection chose {q}", band.order)));
    }
    let summary = BandSummary::of(band, config.threshold);
    let regime = match q {
        1 => match summary.excludes_zero {
            Some(Side::Above) => Regime::Decline,
            Some(Side::Below) => Regime::Growth,
            None => Regime::Stagnation,
        },
        2 => Regime::StableFP,
        _ => Regime::Noise,
    };
    let well_price = match (q, band.grid.first(), band.grid.last()) {
        (2, Some(&lo), Some(&hi)) if hi > lo => selection
            .chosen()
            .model()
            .fixed_points(lo, hi)?
            .into_iter()
            .find(|p| p.stability == Stability::Stable && p.location > T::zero())
            .map(|p| p.location),
        _ => None,
    };
    Ok(RegimeLabel {
        tag: tag.into(),
        year: None,
        month: None,
        regime,
        order: q,
        band: summary,
        well_price,
        multimodal: band.mle_outside_68() > crate::mcmc::MULTIMODAL_FRACTION,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    Monthly,
    WholeSeries,
}

/// Settings for the per-window pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    pub window: WindowMode,
    pub q_max: usize,
    pub fit: FitOptions,
    pub mcmc: McmcConfig,
    pub classify: ClassifyConfig,
    pub grid_points: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            window: WindowMode::Monthly,
            q_max: DEFAULT_Q_MAX,
            fit: FitOptions::default(),
            mcmc: McmcConfig::default(),
            classify: ClassifyConfig::default(),
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Everything computed for one window.
#[derive(Debug, Clone)]
pub struct WindowAnalysis<T> {
    pub selection: ModelSelection<T>,
    pub ensemble: PosteriorEnsemble<T>,
    pub band: PotentialBand<T>,
    pub label: RegimeLabel<T>,
}

/// Order selection, posterior sampling, band, and label for one window.
///
/// `seed` replaces the seeds in `config.fit` and `config.mcmc`.
pub fn analyze_window<T: Real>(tag: &str, series: &Series<T>, config: &TrackConfig, seed: u64) -> Result<WindowAnalysis<T>> {
    let fit_opts = FitOptions { seed, ..config.fit };
    let selection = select_order_with(series, config.q_max, &fit_opts)?;
    let mcmc = McmcConfig { seed, ..config.mcmc };
    let ensemble = sample_posterior_at(series, selection.chosen(), &mcmc)?;
    let grid = default_grid(series, config.grid_points.max(2));
    let band = potential_band(&ensemble, &grid, selection.chosen())?.with_observed_min(series.min_value());
    let mut label = classify_window(tag, &selection, &band, &config.classify)?;
    label.multimodal = diagnostics(&ensemble, Some(&band)).multimodal;
    Ok(WindowAnalysis { selection, ensemble, band, label })
}

/// One row of a regime track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase", bound = "T: Real")]
pub enum TrackEntry<T> {
    Labeled(RegimeLabel<T>),
    Skipped { tag: String, year: Option<i32>, month: Option<u32>, reason: String },
}

impl<T> TrackEntry<T> {
    pub fn tag(&self) -> &str {
        match self {
            TrackEntry::Labeled(l) => &l.tag,
            TrackEntry::Skipped { tag, .. } => tag,
        }
    }

    pub fn label(&self) -> Option<&RegimeLabel<T>> {
        match self {
            TrackEntry::Labeled(l) => Some(l),
            TrackEntry::Skipped { .. } => None,
        }
    }
}

/// Tag used for a whole-series window.
pub const WHOLE_SERIES_TAG: &str = "all";

/// A window of a series, possibly too sparse to analyse.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSlot<T> {
    pub tag: String,
    pub year: Option<i32>,
    pub month: Option<u32>,
    /// `None` for months with fewer than two observations.
    pub series: Option<Series<T>>,
}

impl<T> WindowSlot<T> {
    /// Per-window seed: the base seed for the whole series, derived from
    /// `(year, month)` for monthly windows.
    pub fn seed(&self, base: u64) -> u64 {
        match (self.year, self.month) {
            (Some(y), Some(m)) => derive_seed(base, &[y as u64, m as u64]),
            _ => base,
        }
    }
}

/// Splits a series into analysis windows.
///
/// Monthly mode needs a calendar and yields every month present in it.
pub fn window_slots<T: Real>(series: &Series<T>, calendar: Option<&[NaiveDateTime]>, mode: WindowMode) -> Result<Vec<WindowSlot<T>>> {
    match mode {
        WindowMode::WholeSeries => {
            Ok(vec![WindowSlot { tag: WHOLE_SERIES_TAG.into(), year: None, month: None, series: Some(series.clone()) }])
        }
        WindowMode::Monthly => {
            let cal = calendar.ok_or_else(|| Error::Config("monthly windows need dated observations".into()))?;
            let mut windows = monthly_windows(series, cal)?.into_iter().peekable();
            Ok(months_present(cal)
                .into_iter()
                .map(|(y, m)| {
                    let w = windows.next_if(|w| (w.year, w.month) == (y, m));
                    WindowSlot { tag: format!("{y:04}-{m:02}"), year: Some(y), month: Some(m), series: w.map(|w| w.series) }
                })
                .collect())
        }
    }
}

/// Reason recorded for windows with too few observations.
pub const SPARSE_REASON: &str = "fewer than 2 observations";

/// Labels every window of `series` in calendar order.
///
/// Monthly mode needs a calendar; months with fewer than two observations
/// and windows whose pipeline fails appear as skipped entries.
pub fn regime_track<T: Real>(series: &Series<T>, calendar: Option<&[NaiveDateTime]>, config: &TrackConfig) -> Result<Vec<TrackEntry<T>>> {
    check_order(config.q_max)?;
    let slots = window_slots(series, calendar, config.window)?;
    Ok(slots
        .into_par_iter()
        .map(|slot| {
            let skipped = |reason: String| TrackEntry::Skipped { tag: slot.tag.clone(), year: slot.year, month: slot.month, reason };
            let Some(s) = &slot.series else {
                return skipped(SPARSE_REASON.into());
            };
            match analyze_window(&slot.tag, s, config, slot.seed(config.mcmc.seed)) {
                Ok(a) => TrackEntry::Labeled(RegimeLabel { year: slot.year, month: slot.month, ..a.label }),
                Err(e) => skipped(e.to_string()),
            }
        })
        .collect())
}

/// Writes `year,month,label,q,well_price` rows; skipped windows carry the label `Skipped`.
pub fn write_track_csv<T: Real, W: Write>(mut out: W, track: &[TrackEntry<T>]) -> Result<()> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    writeln!(out, "year,month,label,q,well_price")?;
    for e in track {
        match e {
            TrackEntry::Labeled(l) => writeln!(
                out,
                "{},{},{},{},{}",
                opt(l.year.map(|y| y.to_string())),
                opt(l.month.map(|m| m.to_string())),
                l.regime,
                l.order,
                opt(l.well_price.map(|p| p.to_string()))
            )?,
            TrackEntry::Skipped { year, month, .. } => {
                writeln!(out, "{},{},Skipped,,", opt(year.map(|y| y.to_string())), opt(month.map(|m| m.to_string())))?
            }
        }
    }
    Ok(())
}

pub fn write_track_json<T: Real, W: Write>(out: W, track: &[TrackEntry<T>]) -> Result<()> {
    serde_json::to_writer_pretty(out, track).map_err(|e| Error::Io(e.to_string()))
}

/// Counts of chosen-order pairs for aligned windows of two series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderConfusion {
    /// `counts[i][j]`: windows with order `i+1` under A and `j+1` under B.
    pub counts: [[usize; MAX_ORDER]; MAX_ORDER],
}

impl OrderConfusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..MAX_ORDER).map(|i| self.counts[i][i]).sum()
    }

    pub fn get(&self, order_a: usize, order_b: usize) -> usize {
        self.counts[order_a - 1][order_b - 1]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "order_a,b1,b2,b3,b4")?;
        for (i, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{},{}", i + 1, cells.join(","))?;
        }
        Ok(())
    }
}

pub fn order_confusion<T: Real>(a: &[ModelSelection<T>], b: &[ModelSelection<T>]) -> Result<OrderConfusion> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    let mut m = OrderConfusion::default();
    for (x, y) in a.iter().zip(b) {
        check_order(x.chosen_order)?;
        check_order(y.chosen_order)?;
        m.counts[x.chosen_order - 1][y.chosen_order - 1] += 1;
    }
    Ok(m)
}
