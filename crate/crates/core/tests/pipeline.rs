use std::fs::File;

use langevin_core::inference::{closed_form_mle, total_loglik};
use langevin_core::mcmc::{default_grid, diagnostics, read_band_csv, write_band_csv, DEFAULT_GRID_POINTS};
use langevin_core::simulate::{simulate_ensemble, EnsembleConfig};
use langevin_core::timeseries::{load_series, write_price_csv, SeriesFormat};
use langevin_core::{
    fit_mle, potential_band, sample_posterior, select_order, DriftModel, DriftModel32, GridStyle, McmcConfig, PotentialBand, Series, Series32,
};
use proptest::prelude::*;
use tempfile::TempDir;

fn well_path(n: usize, seed: u64) -> Series {
    let model = DriftModel::from_phi(&[1e-4, 0.2, -0.002]).unwrap();
    let cfg = EnsembleConfig { s0: 100.0, ..EnsembleConfig::new(1, n, GridStyle::Equidistant, seed) };
    simulate_ensemble(&model, &cfg).unwrap().paths.remove(0)
}

#[test]
fn file_to_band_pipeline() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("well.csv");
    let original = well_path(600, 3);
    write_price_csv(File::create(&path).unwrap(), &original, None).unwrap();
    let loaded = load_series::<f64>(&path, SeriesFormat::PriceCsv).unwrap();
    assert_eq!(loaded.series.values(), original.values());
    assert_eq!(loaded.series.times(), original.times());
    assert!(loaded.calendar.is_none());

    let series = loaded.series;
    let sel = select_order(&series, 4).unwrap();
    let chosen = sel.chosen();
    let cfg = McmcConfig { steps: 1500, burn_in: 500, seed: 3, ..Default::default() };
    let ens = sample_posterior(&series, chosen.order, &cfg).unwrap();
    let band = potential_band(&ens, &default_grid(&series, DEFAULT_GRID_POINTS), chosen).unwrap();
    assert!(band.is_nested());
    let diag = diagnostics(&ens, Some(&band));
    assert_eq!(diag.coordinates.len(), chosen.order + 1);

    let band_path = tmp.path().join("band.csv");
    write_band_csv(File::create(&band_path).unwrap(), &band).unwrap();
    let back: PotentialBand = read_band_csv(File::open(&band_path).unwrap(), chosen.order).unwrap();
    assert_eq!(back, band);
}

#[test]
fn single_precision_agrees_with_double() {
    let s64 = well_path(400, 4);
    let s32 = Series32::new(s64.times().iter().map(|&t| t as f32).collect(), s64.values().iter().map(|&v| v as f32).collect()).unwrap();
    let m64 = DriftModel::from_phi(&[1e-4, 0.2, -0.002]).unwrap();
    let m32 = DriftModel32::from_phi(&[1e-4, 0.2, -0.002]).unwrap();
    let (l64, l32) = (total_loglik(&m64, &s64).unwrap(), total_loglik(&m32, &s32).unwrap());
    assert!(((l32 as f64 - l64) / l64).abs() < 1e-4, "{l32} vs {l64}");
    let (f64_fit, f32_fit) = (fit_mle(&s64, 2).unwrap(), fit_mle(&s32, 2).unwrap());
    for (a, b) in f64_fit.phi.iter().zip(&f32_fit.phi) {
        assert!((a - *b as f64).abs() <= 1e-2 * a.abs().max(1e-3), "{:?} vs {:?}", f64_fit.phi, f32_fit.phi);
    }
}

fn positive_series() -> impl Strategy<Value = Series> {
    (prop::collection::vec(0.5f64..2.0, 6..40), prop::collection::vec(0.05f64..1.0, 40)).prop_map(|(vals, steps)| {
        let mut t = 0.0;
        let times = (0..vals.len())
            .map(|i| {
                if i > 0 {
                    t += steps[i];
                }
                t
            })
            .collect();
        Series::new(times, vals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglik_splits_at_any_interior_point(s in positive_series(), cut in 1usize..5, a1 in -1.0f64..1.0, a2 in -0.5f64..0.5) {
        let m = DriftModel::from_phi(&[0.04, a1, a2]).unwrap();
        let k = cut.min(s.len() - 2);
        let left = s.slice(0, k + 1).unwrap();
        let right = s.slice(k, s.len()).unwrap();
        let whole = total_loglik(&m, &s).unwrap();
        let parts = total_loglik(&m, &left).unwrap() + total_loglik(&m, &right).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
    }

    #[test]
    fn closed_form_is_a_local_maximum(s in positive_series(), q in 1usize..=2, dir in prop::collection::vec(-1.0f64..1.0, 3)) {
        let phi = closed_form_mle(&s, q).unwrap();
        let best = total_loglik(&DriftModel::from_phi(&phi).unwrap(), &s).unwrap();
        let moved: Vec<f64> = phi.iter().zip(&dir).map(|(p, d)| p + 1e-3 * d * p.abs().max(1e-3)).collect();
        prop_assume!(moved[0] > 0.0);
        let other = total_loglik(&DriftModel::from_phi(&moved).unwrap(), &s).unwrap();
        prop_assert!(other <= best + 1e-9 * best.abs().max(1.0), "{other} > {best}");
    }

    #[test]
    fn potential_is_minus_integrated_drift(alphas in prop::collection::vec(-2.0f64..2.0, 1..=4), p in 0.1f64..3.0) {
        let m = DriftModel::new(alphas, 0.1).unwrap();
        let h = 1e-5;
        let dv = (m.potential(p + h) - m.potential(p - h)) / (2.0 * h);
        prop_assert!((dv + m.drift(p)).abs() < 1e-6 * (1.0 + m.drift(p).abs()));
        prop_assert_eq!(m.potential(0.0), 0.0);
    }
}
