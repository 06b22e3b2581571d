//! Transition likelihood, maximum-likelihood fits, and AIC order selection.
//!
//! Each observed transition `s_n → s_{n+1}` over `Δt` is scored by the
//! Gaussian one-step propagator with mean `s_n + f(s_n)Δt` and variance
//! `(σ s_n)²Δt`; the series log-likelihood is the sum over transitions.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, least_squares};
use crate::model::{check_order, DriftModel, MAX_ORDER};
use crate::optimize::{nelder_mead, Minimum, NelderMeadOptions};
use crate::rng::rng_from;
use crate::scalar::Real;
use crate::timeseries::Series;

/// Log-density of observing `s_next` at `t_next` given `s_n` at `t_n`.
pub fn step_loglik<T: Real>(model: &DriftModel<T>, s_n: T, t_n: T, s_next: T, t_next: T) -> Result<T> {
    step_loglik_at(model, s_n, t_n, s_next, t_next, 0)
}

fn step_loglik_at<T: Real>(model: &DriftModel<T>, s_n: T, t_n: T, s_next: T, t_next: T, index: usize) -> Result<T> {
    let dt = t_next - t_n;
    if !(dt > T::zero()) {
        return Err(Error::InvalidSeries(format!("non-increasing times at transition {index}")));
    }
    let sd = model.sigma() * s_n;
    let var = sd * sd * dt;
    if s_n.is_zero() || !(var > T::zero()) || !var.is_finite() {
        return Err(Error::DegenerateState { index });
    }
    let mean = s_n + model.drift(s_n) * dt;
    let r = s_next - mean;
    Ok(-(T::lit(std::f64::consts::TAU) * var).ln() / T::lit(2.0) - r * r / (T::lit(2.0) * var))
}

/// Sum of [`step_loglik`] over consecutive pairs of `series`.
pub fn total_loglik<T: Real>(model: &DriftModel<T>, series: &Series<T>) -> Result<T> {
    let (t, s) = (series.times(), series.values());
    (0..series.transitions()).try_fold(T::zero(), |acc, i| Ok(acc + step_loglik_at(model, s[i], t[i], s[i + 1], t[i + 1], i)?))
}

/// `-2 L_max + 2(q + 1)`.
pub fn aic<T: Real>(log_likelihood: T, order: usize) -> T {
    T::lit(-2.0) * log_likelihood + T::from_count(2 * (order + 1))
}

/// Per-transition quantities reused across likelihood evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Transitions<T> {
    s: Vec<T>,
    dt: Vec<T>,
    ds: Vec<T>,
    /// `1 / (s² Δt)`.
    weight: Vec<T>,
    /// `Σ -½ log(2π s² Δt)`.
    log_norm: T,
}

impl<T: Real> Transitions<T> {
    pub(crate) fn new(series: &Series<T>) -> Result<Self> {
        let (t, v) = (series.times(), series.values());
        let n = series.transitions();
        let mut out = Self {
            s: Vec::with_capacity(n),
            dt: Vec::with_capacity(n),
            ds: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            log_norm: T::zero(),
        };
        let half = T::lit(0.5);
        let tau = T::lit(std::f64::consts::TAU);
        for i in 0..n {
            let s = v[i];
            let dt = t[i + 1] - t[i];
            let s2dt = s * s * dt;
            if s.is_zero() || !(s2dt > T::zero()) || !s2dt.is_finite() {
                return Err(Error::DegenerateState { index: i });
            }
            out.s.push(s);
            out.dt.push(dt);
            out.ds.push(v[i + 1] - s);
            out.weight.push(T::one() / s2dt);
            out.log_norm = out.log_norm - half * (tau * s2dt).ln();
        }
        Ok(out)
    }

    pub(crate) fn len(&self) -> usize {
        self.s.len()
    }

    /// Weighted residual sum `Σ (Δs - f(s)Δt)² / (s²Δt)`.
    fn weighted_rss(&self, alphas: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.s.len() {
            let s = self.s[i];
            let f = alphas.iter().rev().fold(T::zero(), |a, &c| a * s + c) * s;
            let r = self.ds[i] - f * self.dt[i];
            acc = acc + r * r * self.weight[i];
        }
        acc
    }

    /// Log-likelihood at `φ = (σ², α…)`; `-∞` outside `σ² > 0`.
    pub(crate) fn loglik_phi(&self, phi: &[T]) -> T {
        let sigma2 = phi[0];
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return T::neg_infinity();
        }
        let n = T::from_count(self.len());
        self.log_norm - n / T::lit(2.0) * sigma2.ln() - self.weighted_rss(&phi[1..]) / (T::lit(2.0) * sigma2)
    }

    /// Rows `s^(i-1)·√Δt`, `i = 1..q`, and targets `Δs / (s√Δt)`.
    fn whitened_design(&self, q: usize) -> (Vec<Vec<T>>, Vec<T>) {
        let rows = self
            .s
            .iter()
            .zip(&self.dt)
            .map(|(&s, &dt)| {
                let sq = dt.sqrt();
                let mut p = sq;
                (0..q)
                    .map(|_| {
                        let v = p;
                        p = p * s;
                        v
                    })
                    .collect()
            })
            .collect();
        let y = self.s.iter().zip(&self.dt).zip(&self.ds).map(|((&s, &dt), &ds)| ds / (s * dt.sqrt())).collect();
        (rows, y)
    }
}

/// Exact maximiser of the propagator likelihood.
///
/// For fixed `σ²` the log-likelihood is quadratic in `α`, so the optimum is
/// the least-squares solution of `Δs/(s√Δt)` on `s^(i-1)√Δt` with
/// `σ² = RSS / N`. Returns `φ*`.
pub fn closed_form_mle<T: Real>(series: &Series<T>, q: usize) -> Result<Vec<T>> {
    check_order(q)?;
    let tr = Transitions::new(series)?;
    closed_form(&tr, q)
}

fn closed_form<T: Real>(tr: &Transitions<T>, q: usize) -> Result<Vec<T>> {
    let (rows, y) = tr.whitened_design(q);
    let ls = least_squares(&rows, &y).ok_or_else(|| Error::OptimizerFailure(format!("design rank deficient at order {q}")))?;
    let sigma2 = tr.weighted_rss(&ls.coef) / T::from_count(tr.len());
    if !(sigma2 > T::zero()) {
        return Err(Error::DegenerateState { index: 0 });
    }
    Ok(std::iter::once(sigma2).chain(ls.coef).collect())
}

/// Optimizer settings for [`fit_mle_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Random restarts in addition to the deterministic starts.
    pub restarts: usize,
    pub seed: u64,
    /// Also start from the exact least-squares optimum.
    pub closed_form_start: bool,
    /// Overrides the default `50·(q+1)²` iteration cap per run.
    pub max_iter: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 5, seed: 0, closed_form_start: true, max_iter: None }
    }
}

/// Maximum-likelihood estimate for one drift order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FitResult<T> {
    pub order: usize,
    /// `φ* = (σ², α₁, …, α_q)`.
    pub phi: Vec<T>,
    pub log_likelihood: T,
    pub aic: T,
    /// Nelder-Mead iterations summed over all starts.
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> FitResult<T> {
    pub fn model(&self) -> DriftModel<T> {
        DriftModel::from_phi(&self.phi).expect("fitted parameters are valid")
    }

    pub fn sigma2(&self) -> T {
        self.phi[0]
    }

    pub fn alphas(&self) -> &[T] {
        &self.phi[1..]
    }
}

/// Fits order `q` with default options.
pub fn fit_mle<T: Real>(series: &Series<T>, q: usize) -> Result<FitResult<T>> {
    fit_mle_with(series, q, &FitOptions::default())
}

/// Maximises the series log-likelihood over `φ` by Nelder-Mead on
/// `(log σ², α)`.
///
/// The α coordinates are expressed relative to the regression start and
/// scaled by the regression covariance, so one simplex unit is roughly one
/// standard error in every direction.
pub fn fit_mle_with<T: Real>(series: &Series<T>, q: usize, opts: &FitOptions) -> Result<FitResult<T>> {
    check_order(q)?;
    if series.len() < q + 2 {
        return Err(Error::InvalidSeries(format!("order {q} needs at least {} observations, got {}", q + 2, series.len())));
    }
    let tr = Transitions::new(series)?;
    let n = tr.len();
    let p = q + 1;

    let exact = closed_form(&tr, q);
    if let Err(e @ Error::DegenerateState { .. }) = &exact {
        return Err(e.clone());
    }

    // moment-matched start
    let increments: Vec<T> = (0..n).map(|i| tr.ds[i] * tr.weight[i].sqrt()).collect();
    let mean = increments.iter().copied().sum::<T>() / T::from_count(n);
    let var0 = increments.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / T::from_count(n.saturating_sub(1).max(1));
    if !(var0 > T::zero()) {
        return Err(Error::DegenerateState { index: 0 });
    }
    let drift_rows: Vec<Vec<T>> = tr
        .s
        .iter()
        .map(|&s| {
            let mut pw = s;
            (0..q)
                .map(|_| {
                    let v = pw;
                    pw = pw * s;
                    v
                })
                .collect()
        })
        .collect();
    let rates: Vec<T> = tr.ds.iter().zip(&tr.dt).map(|(&ds, &dt)| ds / dt).collect();
    let alpha0 = least_squares(&drift_rows, &rates).map(|l| l.coef).unwrap_or_else(|| vec![T::zero(); q]);
    let log_s2_0 = var0.ln();

    // affine map θ → φ
    let (rows, _) = tr.whitened_design(q);
    let chol = least_squares(&rows, &vec![T::zero(); n]).and_then(|ls| {
        let cov: Vec<T> = ls.xtx_inv.iter().map(|&c| c * var0).collect();
        cholesky(&cov, q)
    });
    let chol = chol.unwrap_or_else(|| {
        let mut l = vec![T::zero(); q * q];
        for i in 0..q {
            l[i * q + i] = T::lit(0.1) * (alpha0[i].abs() + T::lit(1e-3));
        }
        l
    });
    let tau_scale = (T::lit(2.0) / T::from_count(n)).sqrt();
    let to_phi = |theta: &[T]| -> Vec<T> {
        let mut phi = Vec::with_capacity(p);
        phi.push((log_s2_0 + theta[0] * tau_scale).exp());
        for i in 0..q {
            let shift = (0..=i).fold(T::zero(), |acc, k| acc + chol[i * q + k] * theta[1 + k]);
            phi.push(alpha0[i] + shift);
        }
        phi
    };
    let from_phi = |phi: &[T]| -> Vec<T> {
        let mut theta = vec![T::zero(); p];
        theta[0] = (phi[0].ln() - log_s2_0) / tau_scale;
        // forward substitution L η = α - α₀
        for i in 0..q {
            let s = (0..i).fold(phi[1 + i] - alpha0[i], |acc, k| acc - chol[i * q + k] * theta[1 + k]);
            theta[1 + i] = s / chol[i * q + i];
        }
        theta
    };
    let objective = |theta: &[T]| -> T { -tr.loglik_phi(&to_phi(theta)) };

    let mut starts: Vec<Vec<T>> = vec![vec![T::zero(); p]];
    if opts.closed_form_start {
        if let Ok(phi) = &exact {
            let th = from_phi(phi);
            if th.iter().all(|x| x.is_finite()) {
                starts.push(th);
            }
        }
    }
    let mut rng = rng_from(opts.seed, &[q as u64]);
    for _ in 0..opts.restarts {
        starts.push(
            (0..p)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(2.0 * z)
                })
                .collect(),
        );
    }

    let nm = NelderMeadOptions { max_iter: opts.max_iter.unwrap_or(50 * p * p), ..Default::default() };
    let unit = vec![T::one(); p];
    let mut total_iter = 0;
    let mut best: Option<Minimum<T>> = None;
    for x0 in &starts {
        let m = nelder_mead(objective, x0, &unit, &nm);
        total_iter += m.iterations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    // restart from the incumbent until the likelihood stops moving
    for _ in 0..5 {
        if !best.value.is_finite() {
            break;
        }
        let m = nelder_mead(objective, &best.x, &unit, &nm);
        total_iter += m.iterations;
        let gain = best.value - m.value;
        if m.value < best.value {
            best = m;
        }
        if !(gain > T::lit(1e-10)) {
            break;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::OptimizerFailure(format!("no finite likelihood found at order {q}")));
    }
    let phi = to_phi(&best.x);
    let log_likelihood = -best.value;
    Ok(FitResult { order: q, aic: aic(log_likelihood, q), phi, log_likelihood, iterations: total_iter, converged: best.converged })
}

/// A fit that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFailure {
    pub order: usize,
    pub reason: String,
}

/// Fits for `q = 1..=q_max` and the AIC-minimising order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelSelection<T> {
    pub fits: Vec<FitResult<T>>,
    pub chosen_order: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<OrderFailure>,
}

impl<T: Real> ModelSelection<T> {
    pub fn chosen(&self) -> &FitResult<T> {
        self.fit(self.chosen_order).expect("chosen order was fitted")
    }

    pub fn fit(&self, q: usize) -> Option<&FitResult<T>> {
        self.fits.iter().find(|f| f.order == q)
    }

    /// Builds a selection from finished fits: minimal AIC, ties to the smaller order.
    pub fn from_fits(mut fits: Vec<FitResult<T>>, failures: Vec<OrderFailure>) -> Result<Self> {
        fits.sort_by_key(|f| f.order);
        let chosen = fits
            .iter()
            .fold(None::<&FitResult<T>>, |acc, f| match acc {
                Some(b) if !(f.aic < b.aic) => Some(b),
                _ => Some(f),
            })
            .ok_or(Error::SelectionFailure)?
            .order;
        Ok(Self { fits, chosen_order: chosen, failures })
    }
}

pub fn select_order<T: Real>(series: &Series<T>, q_max: usize) -> Result<ModelSelection<T>> {
    select_order_with(series, q_max, &FitOptions::default())
}

/// Fits every order up to `q_max` (in parallel) and picks the lowest AIC.
pub fn select_order_with<T: Real>(series: &Series<T>, q_max: usize, opts: &FitOptions) -> Result<ModelSelection<T>> {
    check_order(q_max)?;
    Transitions::new(series)?;
    let results: Vec<(usize, Result<FitResult<T>>)> =
        (1..=q_max).into_par_iter().map(|q| (q, fit_mle_with(series, q, opts))).collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    for (q, r) in results {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => {
                failures.push(OrderFailure { order: q, reason: e.to_string() });
                errors.push(e);
            }
        }
    }
    if fits.is_empty() {
        // a shared cause (e.g. zero-variance data) is more useful than a generic failure
        if let Some(first) = errors.first() {
            if errors.iter().all(|e| e == first) {
                return Err(first.clone());
            }
        }
        return Err(Error::SelectionFailure);
    }
    ModelSelection::from_fits(fits, failures)
}

/// Default highest order considered by [`select_order`].
pub const DEFAULT_Q_MAX: usize = MAX_ORDER;
