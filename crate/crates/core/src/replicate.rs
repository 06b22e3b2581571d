//! Synthetic recovery experiments.
//!
//! * Order recovery: for each true order, random-parameter ensembles are
//!   simulated and the AIC-selected order is histogrammed.
//! * Parameter recovery: one fixed cubic model is simulated repeatedly and
//!   refitted at its own order and one order higher.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_mle_with, select_order_with, FitOptions};
use crate::model::{check_order, DriftModel, MAX_ORDER};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::simulate::{random_model, simulate_ensemble, simulate_ensemble_with, EnsembleConfig, GridStyle, DEFAULT_DIVERGENCE_BOUND};

/// One pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn all_passed(v: &[Verdict]) -> bool {
    v.iter().all(|x| x.passed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderRecoveryConfig {
    pub true_orders: Vec<usize>,
    /// Orders whose histogram must peak at the true order.
    pub required: Vec<usize>,
    pub count: usize,
    pub length: usize,
    pub grid_style: GridStyle,
    pub dt: f64,
    pub s0: f64,
    pub divergence_bound: f64,
    pub collapse_floor: f64,
    pub q_max: usize,
    pub seed: u64,
}

impl Default for OrderRecoveryConfig {
    fn default() -> Self {
        Self {
            true_orders: vec![1, 2, 3, 4],
            required: vec![1, 2, 3],
            count: 100,
            length: 1000,
            grid_style: GridStyle::Jittered,
            dt: 0.3,
            s0: 10.0,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
            collapse_floor: 1e-3,
            q_max: MAX_ORDER,
            seed: 11,
        }
    }
}

/// Selected orders for one true order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderHistogram {
    pub true_order: usize,
    /// `counts[k]`: paths whose selected order is `k + 1`.
    pub counts: Vec<usize>,
    /// Paths for which every fit failed.
    pub failures: usize,
    pub attempts: usize,
    pub rejected: usize,
}

impl OrderHistogram {
    /// The strictly most frequent selected order.
    pub fn modal(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        let mut at = self.counts.iter().enumerate().filter(|(_, &c)| c == max);
        let first = at.next()?.0;
        at.next().is_none().then_some(first + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecoveryReport {
    pub config: OrderRecoveryConfig,
    pub histograms: Vec<OrderHistogram>,
    pub verdicts: Vec<Verdict>,
}

impl OrderRecoveryReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.verdicts)
    }

    /// Writes `true_q,chosen_q,count` rows.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "true_q,chosen_q,count")?;
        for h in &self.histograms {
            for (k, c) in h.counts.iter().enumerate() {
                writeln!(out, "{},{},{}", h.true_order, k + 1, c)?;
            }
        }
        Ok(())
    }
}

/// Histogram of AIC-selected orders for random models of each true order.
pub fn order_recovery(config: &OrderRecoveryConfig) -> Result<OrderRecoveryReport> {
    check_order(config.q_max)?;
    for &q in config.true_orders.iter().chain(&config.required) {
        check_order(q)?;
    }
    let mut histograms = Vec::with_capacity(config.true_orders.len());
    for &q in &config.true_orders {
        let ens_cfg = EnsembleConfig {
            count: config.count,
            length: config.length,
            grid_style: config.grid_style,
            dt: config.dt,
            s0: config.s0,
            seed: derive_seed(config.seed, &[q as u64]),
            divergence_bound: config.divergence_bound,
            collapse_floor: Some(config.collapse_floor),
        };
        let ens = simulate_ensemble_with(&ens_cfg, |s| random_model::<f64>(q, s).expect("order checked"))?;
        let opts = FitOptions { seed: config.seed, ..Default::default() };
        let chosen: Vec<Option<usize>> =
            ens.paths.par_iter().map(|p| select_order_with(p, config.q_max, &opts).ok().map(|s| s.chosen_order)).collect();
        let mut counts = vec![0; config.q_max];
        let mut failures = 0;
        for c in chosen {
            match c {
                Some(k) => counts[k - 1] += 1,
                None => failures += 1,
            }
        }
        histograms.push(OrderHistogram { true_order: q, counts, failures, attempts: ens.attempts, rejected: ens.rejected });
    }
    let verdicts = config
        .required
        .iter()
        .map(|&q| match histograms.iter().find(|h| h.true_order == q) {
            Some(h) => {
                let modal = h.modal();
                Verdict::new(
                    format!("order-recovery q={q}"),
                    modal == Some(q),
                    format!("selected-order counts {:?}, modal {}", h.counts, modal.map_or("tied".into(), |m| m.to_string())),
                )
            }
            None => Verdict::new(format!("order-recovery q={q}"), false, "true order not simulated"),
        })
        .collect();
    Ok(OrderRecoveryReport { config: config.clone(), histograms, verdicts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterRecoveryConfig {
    /// `φ = (σ², α₁, …, α_q)`.
    pub phi: Vec<f64>,
    pub count: usize,
    pub length: usize,
    pub grid_style: GridStyle,
    pub dt: f64,
    pub s0: f64,
    /// Order of the second, over-parameterised fit.
    pub overfit_order: usize,
    pub seed: u64,
}

impl Default for ParameterRecoveryConfig {
    fn default() -> Self {
        Self {
            phi: vec![0.05, 2.0, -1.0, 0.01],
            count: 100,
            length: 1000,
            grid_style: GridStyle::Jittered,
            dt: 0.1,
            s0: 1.0,
            overfit_order: 4,
            seed: 11,
        }
    }
}

/// Ensemble mean and standard deviation of one estimated parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub std: f64,
}

impl ParameterSummary {
    /// `|mean - truth| ≤ std`.
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRecoveryReport {
    pub config: ParameterRecoveryConfig,
    /// `φ*` per path at the true order.
    pub estimates: Vec<Vec<f64>>,
    /// `φ*` per path at the over-parameterised order.
    pub overfit_estimates: Vec<Vec<f64>>,
    pub failures: usize,
    pub rejected: usize,
    pub summary: Vec<ParameterSummary>,
    pub overfit_summary: Vec<ParameterSummary>,
    pub verdicts: Vec<Verdict>,
}

impl ParameterRecoveryReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.verdicts)
    }

    /// Writes `path,order,sigma2,alpha1..alpha{max}` rows; missing coefficients are empty.
    pub fn write_estimates_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let width = self.config.overfit_order.max(self.config.phi.len() - 1);
        let alphas: Vec<String> = (1..=width).map(|i| format!("alpha{i}")).collect();
        writeln!(out, "path,order,sigma2,{}", alphas.join(","))?;
        for set in [&self.estimates, &self.overfit_estimates] {
            for (i, phi) in set.iter().enumerate() {
                let mut cells: Vec<String> = phi.iter().map(|v| v.to_string()).collect();
                cells.resize(width + 1, String::new());
                writeln!(out, "{i},{},{}", phi.len() - 1, cells.join(","))?;
            }
        }
        Ok(())
    }
}

fn param_name(i: usize) -> String {
    if i == 0 {
        "sigma2".into()
    } else {
        format!("alpha{i}")
    }
}

fn summarise(estimates: &[Vec<f64>], truth: &[f64]) -> Vec<ParameterSummary> {
    let n = estimates.len() as f64;
    (0..estimates.first().map_or(0, Vec::len))
        .map(|i| {
            let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / n;
            let var = estimates.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            ParameterSummary { name: param_name(i), truth: truth.get(i).copied().unwrap_or(0.0), mean, std: var.sqrt() }
        })
        .collect()
}

/// Simulates the fixed model `count` times and refits it.
///
/// Verdicts: each true parameter within one ensemble standard deviation of
/// the mean; the highest coefficient's mean within one standard deviation
/// of zero; and the over-parameterised fit's `α₂` interval containing zero.
pub fn parameter_recovery(config: &ParameterRecoveryConfig) -> Result<ParameterRecoveryReport> {
    let model = DriftModel::from_phi(&config.phi)?;
    let q = model.order();
    check_order(config.overfit_order)?;
    if config.count < 2 {
        return Err(Error::Config("parameter recovery needs at least 2 paths".into()));
    }
    let ens_cfg = EnsembleConfig {
        dt: config.dt,
        s0: config.s0,
        ..EnsembleConfig::new(config.count, config.length, config.grid_style, config.seed)
    };
    let ens = simulate_ensemble(&model, &ens_cfg)?;
    let opts = FitOptions { seed: config.seed, ..Default::default() };
    let fits: Vec<Option<(Vec<f64>, Vec<f64>)>> = ens
        .paths
        .par_iter()
        .map(|p| {
            let a = fit_mle_with(p, q, &opts).ok()?;
            let b = fit_mle_with(p, config.overfit_order, &opts).ok()?;
            Some((a.phi, b.phi))
        })
        .collect();
    let failures = fits.iter().filter(|f| f.is_none()).count();
    let (estimates, overfit_estimates): (Vec<_>, Vec<_>) = fits.into_iter().flatten().unzip();
    if estimates.len() < 2 {
        return Err(Error::OptimizerFailure(format!("only {} of {} paths could be fitted", estimates.len(), config.count)));
    }
    let summary = summarise(&estimates, &config.phi);
    let overfit_summary = summarise(&overfit_estimates, &config.phi);

    let mut verdicts: Vec<Verdict> = summary
        .iter()
        .map(|s| {
            Verdict::new(
                format!("coverage {}", s.name),
                s.covers(s.truth),
                format!("truth {} vs mean {:.6} ± {:.6}", s.truth, s.mean, s.std),
            )
        })
        .collect();
    let top = &summary[q];
    verdicts.push(Verdict::new(
        format!("null-consistency {}", top.name),
        top.mean.abs() < top.std,
        format!("|mean| {:.6} vs std {:.6}", top.mean.abs(), top.std),
    ));
    if config.overfit_order > q && q >= 2 {
        let a2 = &overfit_summary[2];
        verdicts.push(Verdict::new(
            format!("overfit q={} alpha2 contains 0", config.overfit_order),
            a2.covers(0.0),
            format!("mean {:.6} ± {:.6}", a2.mean, a2.std),
        ));
    }
    Ok(ParameterRecoveryReport {
        config: config.clone(),
        estimates,
        overfit_estimates,
        failures,
        rejected: ens.rejected,
        summary,
        overfit_summary,
        verdicts,
    })
}

/// Scalar-generic mean and sample standard deviation.
pub fn mean_std<T: Real>(xs: &[T]) -> (T, T) {
    let n = T::from_count(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    (mean, var.sqrt())
}
