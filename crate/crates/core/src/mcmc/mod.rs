//! Flat-prior posterior sampling over `φ` and potential credible bands.
//!
//! The log-posterior is the series log-likelihood on `σ² > 0` and `-∞`
//! elsewhere. Walkers start in a small ball around the maximum-likelihood
//! point and move by the stretch move.

mod band;
mod diagnostics;
mod io;
mod stretch;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use band::{default_grid, percentile, potential_band, PotentialBand, DEFAULT_GRID_POINTS};
pub use diagnostics::{diagnostics, integrated_autocorr_time, CoordinateSummary, Diagnostics, MULTIMODAL_FRACTION};
pub use io::{read_band_csv, read_draws_csv, write_band_csv, write_draws_csv, DrawRecord};
pub use stretch::{Chain, FnDensity, LogDensity, StretchMove, DEFAULT_STRETCH};

use crate::error::{Error, Result};
use crate::inference::{fit_mle_with, FitOptions, FitResult, Transitions};
use crate::model::check_order;
use crate::rng::rng_from;
use crate::scalar::Real;
use crate::timeseries::Series;

/// Acceptance fraction below which a chain counts as stuck.
pub const STUCK_ACCEPTANCE: f64 = 0.02;

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// `None` picks `max(32, 4(q+1))`.
    pub walkers: Option<usize>,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub stretch: f64,
    pub seed: u64,
    /// Relative radius of the initial ball around `φ*`.
    pub init_scale: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { walkers: None, steps: 5000, burn_in: 1000, thin: 5, stretch: DEFAULT_STRETCH, seed: 0, init_scale: 1e-3 }
    }
}

impl McmcConfig {
    pub fn walkers_for(&self, q: usize) -> usize {
        self.walkers.unwrap_or_else(|| (4 * (q + 1)).max(32))
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        check_order(q)?;
        let w = self.walkers_for(q);
        if w < 2 * (q + 1) {
            return Err(Error::Config(format!("order {q} needs at least {} walkers, got {w}", 2 * (q + 1))));
        }
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!("steps ({}) must exceed burn-in ({})", self.steps, self.burn_in)));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("initial ball radius must be positive".into()));
        }
        StretchMove::new(self.stretch).map(|_| ())
    }
}

/// Retained posterior draws of `φ = (σ², α₁, …, α_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble<T> {
    pub order: usize,
    pub draws: Vec<Vec<T>>,
    /// `(walker, step)` of each draw.
    pub origin: Vec<(usize, usize)>,
    pub walkers: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub stretch: f64,
    /// Post-burn-in acceptance fraction.
    pub acceptance: f64,
    pub seed: u64,
}

/// Chain metadata written next to the draw table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub order: usize,
    pub n_samples: usize,
    pub walkers: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub stretch: f64,
    pub acceptance: f64,
    pub seed: u64,
}

impl<T: Real> PosteriorEnsemble<T> {
    /// Wraps externally produced draws as a single pseudo-walker.
    pub fn from_draws(order: usize, draws: Vec<Vec<T>>) -> Result<Self> {
        check_order(order)?;
        if draws.is_empty() {
            return Err(Error::EmptyInput("no posterior draws".into()));
        }
        for d in &draws {
            if d.len() != order + 1 {
                return Err(Error::LengthMismatch { expected: order + 1, actual: d.len() });
            }
            if !(d[0] > T::zero()) {
                return Err(Error::InvalidModel("draw with sigma^2 <= 0".into()));
            }
        }
        let n = draws.len();
        Ok(Self {
            order,
            origin: (0..n).map(|s| (0, s)).collect(),
            draws,
            walkers: 1,
            steps: n,
            burn_in: 0,
            thin: 1,
            stretch: DEFAULT_STRETCH,
            acceptance: 1.0,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Column `i` of the draw matrix.
    pub fn coordinate(&self, i: usize) -> Vec<T> {
        self.draws.iter().map(|d| d[i]).collect()
    }

    pub fn meta(&self) -> PosteriorMeta {
        PosteriorMeta {
            order: self.order,
            n_samples: self.draws.len(),
            walkers: self.walkers,
            steps: self.steps,
            burn_in: self.burn_in,
            thin: self.thin,
            stretch: self.stretch,
            acceptance: self.acceptance,
            seed: self.seed,
        }
    }
}

/// Fits order `q` and samples the posterior around the fit.
pub fn sample_posterior<T: Real>(series: &Series<T>, q: usize, config: &McmcConfig) -> Result<PosteriorEnsemble<T>> {
    config.validate(q)?;
    let fit = fit_mle_with(series, q, &FitOptions { seed: config.seed, ..Default::default() })?;
    sample_posterior_at(series, &fit, config)
}

/// Samples the posterior of `fit.order` with walkers started around `fit.phi`.
pub fn sample_posterior_at<T: Real>(series: &Series<T>, fit: &FitResult<T>, config: &McmcConfig) -> Result<PosteriorEnsemble<T>> {
    let q = fit.order;
    config.validate(q)?;
    if fit.phi.len() != q + 1 {
        return Err(Error::LengthMismatch { expected: q + 1, actual: fit.phi.len() });
    }
    let tr = Transitions::new(series)?;
    let target = FnDensity::new(q + 1, |phi: &[T]| tr.loglik_phi(phi));

    let walkers = config.walkers_for(q);
    let mut rng = rng_from(config.seed, &[u64::MAX]);
    let radius = T::lit(config.init_scale);
    let init: Vec<Vec<T>> = (0..walkers)
        .map(|_| {
            fit.phi
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let base = if c.is_zero() { T::one() } else { c.abs() };
                    c + radius * base * T::lit(z)
                })
                .collect()
        })
        .collect();
    if init.iter().any(|x| !(x[0] > T::zero())) {
        return Err(Error::Config("initial ball crosses sigma^2 = 0; reduce init_scale".into()));
    }

    let sampler = StretchMove::new(config.stretch)?;
    let chain = sampler.run(&target, &init, config.steps, config.seed)?;
    let acceptance = chain.acceptance_fraction(config.burn_in);
    if acceptance < STUCK_ACCEPTANCE {
        return Err(Error::ChainStuck { acceptance, threshold: STUCK_ACCEPTANCE });
    }
    let mut draws = Vec::new();
    let mut origin = Vec::new();
    for step in (config.burn_in..config.steps).step_by(config.thin) {
        for k in 0..walkers {
            draws.push(chain.position(step, k).to_vec());
            origin.push((k, step));
        }
    }
    Ok(PosteriorEnsemble {
        order: q,
        draws,
        origin,
        walkers,
        steps: config.steps,
        burn_in: config.burn_in,
        thin: config.thin,
        stretch: config.stretch,
        acceptance,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::fit_mle;
    use crate::model::DriftModel;
    use crate::simulate::{make_grid, simulate_path, GridStyle, SimConfig};

    fn stable_path(seed: u64) -> Series<f64> {
        let m = DriftModel::from_phi(&[0.01, 0.5, -0.25]).unwrap();
        let mut rng = rng_from(seed, &[]);
        let grid = make_grid(1000, GridStyle::Jittered, 0.1, &mut rng);
        simulate_path(&SimConfig::new(m, 1.5, grid, seed).unwrap()).unwrap().into_path().unwrap()
    }

    fn quick() -> McmcConfig {
        McmcConfig { steps: 1500, burn_in: 500, thin: 2, seed: 7, ..Default::default() }
    }

    #[test]
    fn conjugate_single_transition() {
        // one transition, σ fixed: α₁ | data ~ N((s₁-s₀)/(s₀Δt), σ²/Δt)
        let (s0, s1, dt, sigma) = (2.0, 2.3, 0.5, 0.4);
        let model_at = |a: f64| DriftModel::new(vec![a], sigma).unwrap();
        let target = FnDensity::new(1, |x: &[f64]| crate::inference::step_loglik(&model_at(x[0]), s0, 0.0, s1, dt).unwrap());
        let init: Vec<Vec<f64>> = (0..16).map(|k| vec![0.3 + 0.01 * k as f64]).collect();
        let chain = StretchMove::default().run(&target, &init, 8000, 11).unwrap();
        let xs: Vec<f64> = (2000..8000).flat_map(|s| (0..16).map(move |k| (s, k))).map(|(s, k)| chain.position(s, k)[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (mu, v) = ((s1 - s0) / (s0 * dt), sigma * sigma / dt);
        let tau = integrated_autocorr_time(&xs, 16).unwrap_or(50.0).max(1.0);
        let se = (v * tau / n).sqrt();
        assert!((mean - mu).abs() < 4.0 * se, "mean {mean} vs {mu} (se {se})");
        assert!((var / v - 1.0).abs() < 0.1, "var {var} vs {v}");
    }

    #[test]
    fn draws_respect_support_and_shape() {
        let s = stable_path(3);
        let ens = sample_posterior(&s, 2, &quick()).unwrap();
        assert_eq!(ens.walkers, 32);
        assert_eq!(ens.len(), 32 * 500);
        assert!(ens.draws.iter().all(|d| d.len() == 3 && d[0] > 0.0));
        assert!(ens.acceptance > 0.02 && ens.acceptance < 1.0);
        assert_eq!(ens.origin[0], (0, 500));
        assert_eq!(ens.origin[32], (0, 502));
    }

    #[test]
    fn deterministic_under_seed() {
        let s = stable_path(4);
        let a = sample_posterior(&s, 1, &quick()).unwrap();
        let b = sample_posterior(&s, 1, &quick()).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = sample_posterior(&s, 1, &McmcConfig { seed: 8, ..quick() }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn marginals_bracket_the_mle() {
        let s = stable_path(5);
        let fit = fit_mle(&s, 2).unwrap();
        let ens = sample_posterior_at(&s, &fit, &McmcConfig { seed: 2, ..Default::default() }).unwrap();
        for i in 0..3 {
            let mut col = ens.coordinate(i);
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (lo, hi) = (percentile(&col, 0.16), percentile(&col, 0.84));
            assert!(lo < fit.phi[i] && fit.phi[i] < hi, "coordinate {i}: {} not in [{lo}, {hi}]", fit.phi[i]);
        }
    }

    #[test]
    fn config_preconditions() {
        let base = McmcConfig::default();
        assert_eq!(base.walkers_for(1), 32);
        assert_eq!(base.walkers_for(4), 32);
        assert_eq!(McmcConfig { walkers: Some(64), ..base }.walkers_for(4), 64);
        assert!(McmcConfig { walkers: Some(9), ..base }.validate(4).is_err());
        assert!(McmcConfig { walkers: Some(10), ..base }.validate(4).is_ok());
        assert!(McmcConfig { steps: 100, burn_in: 100, ..base }.validate(1).is_err());
        assert!(McmcConfig { thin: 0, ..base }.validate(1).is_err());
        assert!(McmcConfig { stretch: 1.0, ..base }.validate(1).is_err());
        assert!(matches!(base.validate(5), Err(Error::OrderOutOfRange(5))));
    }

    #[test]
    fn zero_price_is_degenerate() {
        let s = Series::from_values(vec![1.0, 0.0, 1.0, 1.2]).unwrap();
        let fit = FitResult { order: 1, phi: vec![0.1, 0.0], log_likelihood: 0.0, aic: 4.0, iterations: 0, converged: true };
        assert!(matches!(sample_posterior_at(&s, &fit, &quick()), Err(Error::DegenerateState { index: 1 })));
    }

    #[test]
    fn from_draws_validates() {
        assert!(PosteriorEnsemble::from_draws(1, vec![vec![0.1, 2.0]]).is_ok());
        assert!(PosteriorEnsemble::<f64>::from_draws(1, vec![]).is_err());
        assert!(PosteriorEnsemble::from_draws(1, vec![vec![0.0, 2.0]]).is_err());
        assert!(PosteriorEnsemble::from_draws(2, vec![vec![0.1, 2.0]]).is_err());
    }
}
