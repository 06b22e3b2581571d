//! Polynomial drift models, their potentials, and fixed points.
//!
//! The drift is `f(P) = α₁P + α₂P² + … + α_qP^q` and the potential is the
//! antiderivative of `-f` pinned at `V(0) = 0`:
//! `V(P) = -Σ α_i P^(i+1) / (i+1)`.
//! Diffusion is price-proportional, `σ·P·dW`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest supported drift order.
pub const MAX_ORDER: usize = 4;

/// Grid points used by the sign-change scan in [`DriftModel::fixed_points`].
pub const ROOT_SCAN_POINTS: usize = 2048;
/// Absolute bisection tolerance for roots.
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// Derivative magnitude below which a fixed point is marginal.
pub const MARGINAL_SLOPE: f64 = 1e-10;

/// Drift coefficients `α₁..α_q` plus the diffusion scale `σ`.
///
/// The parameter vector layout is `φ = (σ², α₁, …, α_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriftModel<T> {
    alphas: Vec<T>,
    sigma: T,
}

impl<T: Real> DriftModel<T> {
    /// Builds a model from drift coefficients and diffusion scale.
    ///
    /// `sigma = 0` is accepted as the deterministic limit (useful for
    /// simulation); the likelihood rejects it as degenerate.
    pub fn new(alphas: Vec<T>, sigma: T) -> Result<Self> {
        check_order(alphas.len())?;
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("non-finite drift coefficient".into()));
        }
        if !sigma.is_finite() || sigma < T::zero() {
            return Err(Error::InvalidModel(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { alphas, sigma })
    }

    /// Builds a model from `φ = (σ², α₁, …, α_q)`.
    pub fn from_phi(phi: &[T]) -> Result<Self> {
        let (&sigma2, alphas) = phi
            .split_first()
            .ok_or_else(|| Error::InvalidModel("empty parameter vector".into()))?;
        if !(sigma2 >= T::zero()) {
            return Err(Error::InvalidModel(format!("sigma^2 must be >= 0, got {sigma2}")));
        }
        Self::new(alphas.to_vec(), sigma2.sqrt())
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn sigma2(&self) -> T {
        self.sigma * self.sigma
    }

    /// `φ = (σ², α₁, …, α_q)`.
    pub fn phi(&self) -> Vec<T> {
        std::iter::once(self.sigma2()).chain(self.alphas.iter().copied()).collect()
    }

    /// Number of free parameters, `q + 1`.
    pub fn n_params(&self) -> usize {
        self.order() + 1
    }

    /// Returns a copy with every drift coefficient multiplied by `factor`.
    pub fn scaled_drift(&self, factor: T) -> Self {
        Self {
            alphas: self.alphas.iter().map(|&a| a * factor).collect(),
            sigma: self.sigma,
        }
    }

    /// `Σ α_i P^i`.
    pub fn drift(&self, p: T) -> T {
        // Horner on α_q P^(q-1) + … + α₁, then one more factor of P.
        let inner = self.alphas.iter().rev().fold(T::zero(), |acc, &a| acc * p + a);
        inner * p
    }

    /// `d/dP Σ α_i P^i`.
    pub fn drift_derivative(&self, p: T) -> T {
        self.alphas
            .iter()
            .enumerate()
            .rev()
            .fold(T::zero(), |acc, (i, &a)| acc * p + a * T::from_count(i + 1))
    }

    /// `-Σ α_i P^(i+1) / (i+1)`, with `V(0) = 0`.
    pub fn potential(&self, p: T) -> T {
        let inner = self
            .alphas
            .iter()
            .enumerate()
            .rev()
            .fold(T::zero(), |acc, (i, &a)| acc * p + a / T::from_count(i + 2));
        -(inner * p * p)
    }

    /// All real drift roots inside `[lo, hi]`, plus `P = 0`, sorted by location.
    pub fn fixed_points(&self, lo: T, hi: T) -> Result<Vec<FixedPoint<T>>> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("search range [{lo}, {hi}] must have positive width")));
        }
        let mut roots = vec![T::zero()];
        if self.alphas.iter().any(|a| !a.is_zero()) {
            let n = ROOT_SCAN_POINTS;
            let step = (hi - lo) / T::from_count(n - 1);
            let at = |k: usize| if k == n - 1 { hi } else { lo + step * T::from_count(k) };
            let mut x_prev = at(0);
            let mut f_prev = self.drift(x_prev);
            if f_prev.is_zero() {
                roots.push(x_prev);
            }
            for k in 1..n {
                let x = at(k);
                let f = self.drift(x);
                if f.is_zero() {
                    roots.push(x);
                } else if !f_prev.is_zero() && (f_prev < T::zero()) != (f < T::zero()) {
                    roots.push(self.bisect(x_prev, x, f_prev));
                }
                x_prev = x;
                f_prev = f;
            }
        }
        roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
        let dedup_tol = T::lit(1e-8) * (hi - lo).max(T::one());
        let mut unique: Vec<T> = Vec::with_capacity(roots.len());
        for r in roots {
            match unique.last() {
                Some(&last) if (r - last).abs() <= dedup_tol => {
                    // keep the exact zero if it collided with a bisected root
                    if r.is_zero() {
                        *unique.last_mut().unwrap() = r;
                    }
                }
                _ => unique.push(r),
            }
        }
        Ok(unique
            .into_iter()
            .map(|location| FixedPoint {
                location,
                stability: Stability::from_slope(self.drift_derivative(location)),
            })
            .collect())
    }

    fn bisect(&self, mut a: T, mut b: T, mut fa: T) -> T {
        let tol = T::lit(ROOT_TOLERANCE);
        for _ in 0..200 {
            let mid = a + (b - a) / T::lit(2.0);
            if (b - a) <= tol || mid <= a || mid >= b {
                return mid;
            }
            let fm = self.drift(mid);
            if fm.is_zero() {
                return mid;
            }
            if (fm < T::zero()) == (fa < T::zero()) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        a + (b - a) / T::lit(2.0)
    }
}

pub(crate) fn check_order(q: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&q) {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(q))
    }
}

/// Linear stability of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    fn from_slope<T: Real>(slope: T) -> Self {
        if slope.abs() < T::lit(MARGINAL_SLOPE) {
            Stability::Marginal
        } else if slope < T::zero() {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

/// A root of the drift annotated with its stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FixedPoint<T> {
    pub location: T,
    pub stability: Stability,
}
