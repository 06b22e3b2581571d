use serde::{Deserialize, Serialize};

use super::{PosteriorEnsemble, PotentialBand};
use crate::scalar::Real;

/// MLE-outside-68% fraction above which the posterior is flagged multimodal.
pub const MULTIMODAL_FRACTION: f64 = 0.1;

/// Sokal window constant for the autocorrelation time.
const WINDOW_C: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Integrated autocorrelation time in retained draws; `None` when not estimable.
    pub iat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub order: usize,
    pub n_samples: usize,
    pub acceptance: f64,
    pub coordinates: Vec<CoordinateSummary>,
    /// Fraction of band grid points where the MLE curve leaves the 68% band.
    pub mle_outside_68: Option<f64>,
    pub multimodal: bool,
}

/// Integrated autocorrelation time of interleaved walker chains.
///
/// `values[s·walkers + k]` is walker `k` at retained step `s`. The
/// autocorrelation function is averaged over walkers with non-zero
/// variance and summed up to the smallest window `M ≥ 5 τ(M)`.
pub fn integrated_autocorr_time<T: Real>(values: &[T], walkers: usize) -> Option<f64> {
    if walkers == 0 || values.len() < 2 * walkers || values.len() % walkers != 0 {
        return None;
    }
    let n = values.len() / walkers;
    let series: Vec<Vec<f64>> = (0..walkers)
        .map(|k| (0..n).map(|s| values[s * walkers + k].as_f64()).collect::<Vec<f64>>())
        .filter_map(|x| {
            let m = x.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = x.iter().map(|v| v - m).collect();
            let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
            (c0 > 0.0 && c0.is_finite()).then_some(c.into_iter().map(|v| v / c0.sqrt()).collect())
        })
        .collect();
    if series.is_empty() {
        return None;
    }
    let rho = |lag: usize| -> f64 {
        series.iter().map(|x| x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64).sum::<f64>()
            / series.len() as f64
    };
    let mut tau = 1.0;
    for m in 1..n {
        tau += 2.0 * rho(m);
        if m as f64 >= WINDOW_C * tau {
            break;
        }
    }
    Some(tau.max(f64::MIN_POSITIVE))
}

fn coordinate_name(i: usize) -> String {
    if i == 0 {
        "sigma2".into()
    } else {
        format!("alpha{i}")
    }
}

/// Per-coordinate moments and autocorrelation times; multimodality is
/// judged from the band's MLE curve when a band is given.
pub fn diagnostics<T: Real>(ensemble: &PosteriorEnsemble<T>, band: Option<&PotentialBand<T>>) -> Diagnostics {
    let n = ensemble.len();
    let coordinates = (0..=ensemble.order)
        .map(|i| {
            let col = ensemble.coordinate(i);
            let xs: Vec<f64> = col.iter().map(|v| v.as_f64()).collect();
            // shifted by the first draw so constant columns give exactly zero spread
            let x0 = xs.first().copied().unwrap_or(f64::NAN);
            let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n as f64;
            let std = if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
            let iat = if std > 0.0 { integrated_autocorr_time(&col, ensemble.walkers) } else { None };
            CoordinateSummary { name: coordinate_name(i), mean, std, iat }
        })
        .collect();
    let outside = band.map(PotentialBand::mle_outside_68);
    Diagnostics {
        order: ensemble.order,
        n_samples: n,
        acceptance: ensemble.acceptance,
        coordinates,
        mle_outside_68: outside,
        multimodal: outside.is_some_and(|f| f > MULTIMODAL_FRACTION),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::FitResult;
    use crate::mcmc::potential_band;
    use crate::rng::rng_from;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_draws_not_estimable() {
        let ens = PosteriorEnsemble::from_draws(1, vec![vec![0.1, 0.3]; 20]).unwrap();
        let d = diagnostics(&ens, None);
        assert_eq!(d.coordinates.len(), 2);
        assert_eq!(d.coordinates[1].name, "alpha1");
        assert_eq!(d.coordinates[0].std, 0.0);
        assert!(d.coordinates.iter().all(|c| c.iat.is_none()));
        assert!(!d.multimodal);
    }

    #[test]
    fn white_noise_iat_near_one() {
        let mut rng = rng_from(1, &[]);
        let xs: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tau = integrated_autocorr_time(&xs, 4).unwrap();
        assert!((tau - 1.0).abs() < 0.15, "{tau}");
    }

    #[test]
    fn ar1_iat_matches_theory() {
        // τ = (1 + ρ)/(1 - ρ) for an AR(1) chain
        let rho: f64 = 0.8;
        let mut rng = rng_from(2, &[]);
        let walkers = 8;
        let n = 20_000;
        let mut state = vec![0.0; walkers];
        let mut xs = Vec::with_capacity(n * walkers);
        for _ in 0..n {
            for x in state.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = rho * *x + (1.0 - rho * rho).sqrt() * z;
                xs.push(*x);
            }
        }
        let tau = integrated_autocorr_time(&xs, walkers).unwrap();
        let truth = (1.0 + rho) / (1.0 - rho);
        assert!((tau / truth - 1.0).abs() < 0.1, "{tau} vs {truth}");
    }

    #[test]
    fn mle_at_minor_mode_is_flagged() {
        // 80% of draws around α₁ = 1, 20% around α₁ = -1; the MLE sits in the minor blob
        let mut rng = rng_from(3, &[]);
        let draws: Vec<Vec<f64>> = (0..1000)
            .map(|i| {
                let centre = if i % 5 == 0 { -1.0 } else { 1.0 };
                let z: f64 = StandardNormal.sample(&mut rng);
                vec![0.05, centre + 0.05 * z]
            })
            .collect();
        let ens = PosteriorEnsemble::from_draws(1, draws).unwrap();
        let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
        let minor = FitResult { order: 1, phi: vec![0.05, -1.0], log_likelihood: 0.0, aic: 0.0, iterations: 0, converged: true };
        let band = potential_band(&ens, &grid, &minor).unwrap();
        let d = diagnostics(&ens, Some(&band));
        assert!(d.multimodal, "{:?}", d.mle_outside_68);
        let major = FitResult { phi: vec![0.05, 1.0], ..minor };
        let band = potential_band(&ens, &grid, &major).unwrap();
        assert!(!diagnostics(&ens, Some(&band)).multimodal);
    }
}
