//! Polynomial-drift Langevin models for price series.
//!
//! Prices follow `dP = f(P) dt + σ P dW` with `f(P) = Σ α_i P^i`, `q ≤ 4`.
//! The crate covers simulation, exact Gaussian-propagator likelihoods,
//! maximum-likelihood fits with AIC order selection, ensemble MCMC over the
//! flat-prior posterior, credible bands for the potential `V(P)`, and
//! monthly regime labels.
//!
//! Numeric code is generic over [`Real`] (`f32`/`f64`); the aliases below
//! fix the common `f64` instantiation.

pub mod error;
pub mod inference;
mod linalg;
pub mod mcmc;
pub mod model;
pub mod optimize;
pub mod regimes;
pub mod replicate;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod timeseries;

pub use error::{Error, Result};
pub use scalar::Real;

pub use inference::{aic, closed_form_mle, fit_mle, fit_mle_with, select_order, select_order_with, step_loglik, total_loglik, FitOptions};
pub use mcmc::{potential_band, sample_posterior, McmcConfig};
pub use model::{Stability, MAX_ORDER};
pub use regimes::{classify_window, order_confusion, regime_track, window_slots, Regime, TrackConfig, WindowMode};
pub use simulate::{random_model, simulate_ensemble, simulate_path, GridStyle, PathOutcome};

pub type DriftModel = model::DriftModel<f64>;
pub type DriftModel32 = model::DriftModel<f32>;
pub type FixedPoint = model::FixedPoint<f64>;
pub type Series = timeseries::Series<f64>;
pub type Series32 = timeseries::Series<f32>;
pub type FitResult = inference::FitResult<f64>;
pub type FitResult32 = inference::FitResult<f32>;
pub type ModelSelection = inference::ModelSelection<f64>;
pub type SimConfig = simulate::SimConfig<f64>;
pub type EnsembleConfig = simulate::EnsembleConfig<f64>;
pub type PosteriorEnsemble = mcmc::PosteriorEnsemble<f64>;
pub type PotentialBand = mcmc::PotentialBand<f64>;
pub type RegimeLabel = regimes::RegimeLabel<f64>;
