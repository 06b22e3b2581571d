//! Euler-Maruyama simulation of `dS = f(S) dt + σ S dW` with rejection of
//! diverging trajectories.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_order, DriftModel};
use crate::rng::{rng_from, Rng};
use crate::scalar::Real;
use crate::timeseries::Series;

/// Default absolute bound beyond which a path counts as diverged.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e9;

/// Attempts allowed per requested path before giving up.
pub const ATTEMPTS_PER_PATH: usize = 100;

/// Everything needed to reproduce one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub model: DriftModel<T>,
    pub s0: T,
    pub grid: Vec<T>,
    pub seed: u64,
    pub divergence_bound: T,
    /// Optional lower bound on `s`; paths that fall below it (including any
    /// sign change) are rejected like diverging ones.
    pub collapse_floor: Option<T>,
}

impl<T: Real> SimConfig<T> {
    pub fn new(model: DriftModel<T>, s0: T, grid: Vec<T>, seed: u64) -> Result<Self> {
        let cfg = Self { model, s0, grid, seed, divergence_bound: T::lit(DEFAULT_DIVERGENCE_BOUND), collapse_floor: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::Config("time grid needs at least 2 points".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        if !(self.s0 > T::zero()) || !self.s0.is_finite() {
            return Err(Error::Config(format!("initial value must be positive, got {}", self.s0)));
        }
        if !(self.divergence_bound > self.s0) {
            return Err(Error::Config("divergence bound must exceed the initial value".into()));
        }
        if let Some(floor) = self.collapse_floor {
            if !(floor >= T::zero() && floor < self.s0) {
                return Err(Error::Config("collapse floor must lie in [0, s0)".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome<T> {
    Path(Series<T>),
    /// The path left the admissible range at this grid index.
    Diverged { step: usize },
}

impl<T> PathOutcome<T> {
    pub fn into_path(self) -> Option<Series<T>> {
        match self {
            PathOutcome::Path(s) => Some(s),
            PathOutcome::Diverged { .. } => None,
        }
    }
}

/// One Euler-Maruyama update with a supplied standard normal draw.
#[inline]
pub fn euler_step<T: Real>(model: &DriftModel<T>, s: T, dt: T, eps: T) -> T {
    s + model.drift(s) * dt + model.sigma() * s * dt.sqrt() * eps
}

fn std_normal<T: Real>(rng: &mut Rng) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

/// Simulates one trajectory on the configured grid.
pub fn simulate_path<T: Real>(config: &SimConfig<T>) -> Result<PathOutcome<T>> {
    config.validate()?;
    let mut rng = rng_from(config.seed, &[]);
    Ok(run_path(config, &mut rng))
}

fn run_path<T: Real>(config: &SimConfig<T>, rng: &mut Rng) -> PathOutcome<T> {
    let mut values = Vec::with_capacity(config.grid.len());
    let mut s = config.s0;
    values.push(s);
    for (k, w) in config.grid.windows(2).enumerate() {
        let eps = std_normal::<T>(rng);
        s = euler_step(&config.model, s, w[1] - w[0], eps);
        let collapsed = config.collapse_floor.is_some_and(|f| s < f);
        if !s.is_finite() || s.abs() > config.divergence_bound || collapsed {
            return PathOutcome::Diverged { step: k + 1 };
        }
        values.push(s);
    }
    let series = Series::new(config.grid.clone(), values).expect("grid validated, values finite");
    PathOutcome::Path(series)
}

/// How observation times are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridStyle {
    /// `t_k = k·dt`.
    Equidistant,
    /// Steps drawn as `dt·U[0.5, 1.5]`.
    Jittered,
}

/// Builds a time grid of `length` points starting at zero.
pub fn make_grid<T: Real>(length: usize, style: GridStyle, dt: T, rng: &mut Rng) -> Vec<T> {
    match style {
        GridStyle::Equidistant => (0..length).map(|k| T::from_count(k) * dt).collect(),
        GridStyle::Jittered => {
            let jitter = Uniform::new(0.5f64, 1.5).expect("valid range");
            let mut t = T::zero();
            let mut grid = Vec::with_capacity(length);
            grid.push(t);
            for _ in 1..length {
                t = t + dt * T::lit(jitter.sample(rng));
                grid.push(t);
            }
            grid
        }
    }
}

/// Settings shared by every path in an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnsembleConfig<T> {
    pub count: usize,
    pub length: usize,
    pub grid_style: GridStyle,
    /// Mean time step.
    pub dt: T,
    pub s0: T,
    pub seed: u64,
    pub divergence_bound: T,
    #[serde(default)]
    pub collapse_floor: Option<T>,
}

impl<T: Real> EnsembleConfig<T> {
    pub fn new(count: usize, length: usize, grid_style: GridStyle, seed: u64) -> Self {
        Self {
            count,
            length,
            grid_style,
            dt: T::one(),
            s0: T::one(),
            seed,
            divergence_bound: T::lit(DEFAULT_DIVERGENCE_BOUND),
            collapse_floor: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("ensemble count must be at least 1".into()));
        }
        if self.length < 2 {
            return Err(Error::Config("path length must be at least 2".into()));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::Config("time step must be positive".into()));
        }
        Ok(())
    }
}

/// Accepted paths plus rejection bookkeeping.
#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub paths: Vec<Series<T>>,
    /// Models that generated each path (all equal for a fixed-model ensemble).
    pub models: Vec<DriftModel<T>>,
    pub attempts: usize,
    pub rejected: usize,
}

/// Simulates `count` non-diverging paths of a fixed model.
pub fn simulate_ensemble<T: Real>(model: &DriftModel<T>, config: &EnsembleConfig<T>) -> Result<Ensemble<T>> {
    simulate_ensemble_with(config, |_| model.clone())
}

/// Like [`simulate_ensemble`], but draws a fresh model for every attempt.
///
/// `draw_model` receives the attempt's seed; rejected attempts discard both
/// the model and the path.
pub fn simulate_ensemble_with<T, F>(config: &EnsembleConfig<T>, draw_model: F) -> Result<Ensemble<T>>
where
    T: Real,
    F: Fn(u64) -> DriftModel<T> + Sync,
{
    config.validate()?;
    let budget = ATTEMPTS_PER_PATH * config.count;
    let attempt = |a: usize| -> Option<(DriftModel<T>, Series<T>)> {
        let model_seed = crate::rng::derive_seed(config.seed, &[a as u64, 0]);
        let model = draw_model(model_seed);
        let mut rng = rng_from(config.seed, &[a as u64, 1]);
        let grid = make_grid(config.length, config.grid_style, config.dt, &mut rng);
        let cfg = SimConfig {
            model: model.clone(),
            s0: config.s0,
            grid,
            seed: 0,
            divergence_bound: config.divergence_bound,
            collapse_floor: config.collapse_floor,
        };
        cfg.validate().ok()?;
        run_path(&cfg, &mut rng).into_path().map(|p| (model, p))
    };

    let mut accepted: Vec<(DriftModel<T>, Series<T>)> = Vec::with_capacity(config.count);
    let mut attempts = 0;
    while accepted.len() < config.count && attempts < budget {
        let missing = config.count - accepted.len();
        let batch = (2 * missing).max(rayon::current_num_threads()).min(budget - attempts);
        let results: Vec<_> = (attempts..attempts + batch).into_par_iter().map(attempt).collect();
        for r in results {
            if accepted.len() == config.count {
                break;
            }
            attempts += 1;
            if let Some(ok) = r {
                accepted.push(ok);
            }
        }
    }
    if accepted.len() < config.count {
        return Err(Error::TooManyRejections { rejected: attempts - accepted.len(), attempts });
    }
    let (models, paths): (Vec<_>, Vec<_>) = accepted.into_iter().unzip();
    Ok(Ensemble { rejected: attempts - paths.len(), attempts, paths, models })
}

/// Draws a random model of order `q`.
///
/// `α_i ~ N(0, 1)·10^(1-i)` and `σ ~ U(0.01, 0.3)`.
pub fn random_model<T: Real>(q: usize, seed: u64) -> Result<DriftModel<T>> {
    check_order(q)?;
    let mut rng = rng_from(seed, &[]);
    let alphas = (1..=q)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z * 10f64.powi(1 - i as i32))
        })
        .collect();
    let sigma = T::lit(rng.random_range(0.01..0.3));
    DriftModel::new(alphas, sigma)
}
