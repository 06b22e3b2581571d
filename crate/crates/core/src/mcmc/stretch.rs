//! Affine-invariant ensemble sampler with the Goodman-Weare stretch move.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::scalar::Real;

/// Default stretch scale `a`.
pub const DEFAULT_STRETCH: f64 = 2.0;

/// Unnormalised log target density.
pub trait LogDensity<T>: Sync {
    fn dim(&self) -> usize;

    /// `-∞` outside the support.
    fn log_density(&self, x: &[T]) -> T;
}

/// Adapts a closure into a [`LogDensity`].
#[derive(Debug, Clone, Copy)]
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F> LogDensity<T> for FnDensity<F>
where
    F: Fn(&[T]) -> T + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// Walker states after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    dim: usize,
    walkers: usize,
    steps: usize,
    positions: Vec<T>,
    log_probs: Vec<T>,
    accepted: Vec<usize>,
}

impl<T: Real> Chain<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn walkers(&self) -> usize {
        self.walkers
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// State of `walker` after `step` (0-based).
    pub fn position(&self, step: usize, walker: usize) -> &[T] {
        let at = (step * self.walkers + walker) * self.dim;
        &self.positions[at..at + self.dim]
    }

    pub fn log_prob(&self, step: usize, walker: usize) -> T {
        self.log_probs[step * self.walkers + walker]
    }

    /// Accepted proposals over all proposals made from `from_step` on.
    pub fn acceptance_fraction(&self, from_step: usize) -> f64 {
        let tail = &self.accepted[from_step.min(self.steps)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().sum::<usize>() as f64 / (tail.len() * self.walkers) as f64
    }
}

/// The stretch move with scale `a > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchMove {
    a: f64,
}

impl Default for StretchMove {
    fn default() -> Self {
        Self { a: DEFAULT_STRETCH }
    }
}

impl StretchMove {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::Config(format!("stretch scale must exceed 1, got {a}")));
        }
        Ok(Self { a })
    }

    pub fn scale(&self) -> f64 {
        self.a
    }

    /// Draws `z` with density `∝ 1/√z` on `[1/a, a]`.
    fn draw_z(&self, u: f64) -> f64 {
        let s = (self.a - 1.0) * u + 1.0;
        s * s / self.a
    }

    /// Runs `steps` ensemble updates from the `init` walker positions.
    ///
    /// The ensemble is split into a first and a second half; each half moves
    /// against the frozen other half, so proposals within a half are
    /// independent and evaluated in parallel. Walker `k` at step `s` draws
    /// from its own stream keyed by `(seed, k, s)`.
    pub fn run<T, D>(&self, target: &D, init: &[Vec<T>], steps: usize, seed: u64) -> Result<Chain<T>>
    where
        T: Real,
        D: LogDensity<T> + ?Sized,
    {
        let d = target.dim();
        let w = init.len();
        if d == 0 {
            return Err(Error::Config("target has no coordinates".into()));
        }
        if w < 2 {
            return Err(Error::Config(format!("need at least 2 walkers, got {w}")));
        }
        let mut cur: Vec<T> = Vec::with_capacity(w * d);
        for (k, x) in init.iter().enumerate() {
            if x.len() != d {
                return Err(Error::LengthMismatch { expected: d, actual: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("walker {k} starts at a non-finite point")));
            }
            cur.extend_from_slice(x);
        }
        let mut lp: Vec<T> = init.par_iter().map(|x| target.log_density(x)).collect();
        if let Some(k) = lp.iter().position(|v| !(v.as_f64() > f64::NEG_INFINITY)) {
            return Err(Error::Config(format!("walker {k} starts outside the target's support")));
        }

        let halves = [(0..w / 2, w / 2..w), (w / 2..w, 0..w / 2)];
        let mut chain = Chain {
            dim: d,
            walkers: w,
            steps,
            positions: Vec::with_capacity(steps * w * d),
            log_probs: Vec::with_capacity(steps * w),
            accepted: Vec::with_capacity(steps),
        };
        let dm1 = (d - 1) as f64;
        for step in 0..steps {
            let mut n_acc = 0;
            for (active, other) in halves.iter().cloned() {
                let (frozen, frozen_lp) = (&cur, &lp);
                let updates: Vec<(usize, Option<(Vec<T>, T)>)> = active
                    .into_par_iter()
                    .map(|k| {
                        let mut rng = rng_from(seed, &[k as u64, step as u64]);
                        let j = other.start + rng.random_range(0..other.len());
                        let z = self.draw_z(rng.random::<f64>());
                        let zt = T::lit(z);
                        let xk = &frozen[k * d..(k + 1) * d];
                        let xj = &frozen[j * d..(j + 1) * d];
                        let y: Vec<T> = xj.iter().zip(xk).map(|(&b, &a)| b + zt * (a - b)).collect();
                        let lp_y = target.log_density(&y);
                        let lp_y64 = lp_y.as_f64();
                        let log_ratio = dm1 * z.ln() + lp_y64 - frozen_lp[k].as_f64();
                        let u: f64 = rng.random();
                        let ok = lp_y64 > f64::NEG_INFINITY && lp_y64.is_finite() && u.ln() < log_ratio;
                        (k, ok.then_some((y, lp_y)))
                    })
                    .collect();
                for (k, up) in updates {
                    if let Some((y, l)) = up {
                        cur[k * d..(k + 1) * d].copy_from_slice(&y);
                        lp[k] = l;
                        n_acc += 1;
                    }
                }
            }
            chain.positions.extend_from_slice(&cur);
            chain.log_probs.extend_from_slice(&lp);
            chain.accepted.push(n_acc);
        }
        Ok(chain)
    }
}
