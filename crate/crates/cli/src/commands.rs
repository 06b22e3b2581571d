use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use langevin_core::inference::{fit_mle_with, select_order_with, FitOptions, ModelSelection};
use langevin_core::mcmc::{default_grid, diagnostics, potential_band, sample_posterior_at, write_band_csv, write_draws_csv, McmcConfig};
use langevin_core::model::DriftModel;
use langevin_core::regimes::{regime_track, window_slots, write_track_csv, write_track_json, TrackEntry, WindowSlot, SPARSE_REASON};
use langevin_core::replicate::{order_recovery, parameter_recovery, OrderRecoveryConfig, ParameterRecoveryConfig, Verdict};
use langevin_core::simulate::{simulate_ensemble, EnsembleConfig, GridStyle};
use langevin_core::timeseries::{parse_series, write_long_csv, write_price_csv, LoadedSeries, SeriesFormat};
use langevin_core::MAX_ORDER;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FileConfig, Resolved};
use crate::output::OutDir;
use crate::{ClassifyArgs, Common, Experiment, FitArgs, Outcome, ReplicateArgs, SampleArgs, SimulateArgs};

/// Mean step of simulated grids unless overridden.
const DEFAULT_SIM_DT: f64 = 0.1;

fn load(path: &Path, quotes: SeriesFormat) -> Result<LoadedSeries<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let format = match SeriesFormat::detect(&String::from_utf8_lossy(header)) {
        Some(SeriesFormat::QuoteCsv { .. }) => quotes,
        _ => SeriesFormat::PriceCsv,
    };
    parse_series(bytes.as_slice(), format).with_context(|| format!("loading {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

fn check_qmax(q: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&q) {
        bail!("--qmax must lie in 1..={MAX_ORDER}, got {q}");
    }
    Ok(())
}

fn setup(common: &Common) -> Result<(Resolved, OutDir)> {
    if common.input.is_empty() {
        bail!("no --input given");
    }
    let file = FileConfig::load(common.config.as_deref())?;
    let res = Resolved::new(common, &file);
    check_qmax(res.q_max)?;
    let out = OutDir::new(&common.out, common.force)?;
    Ok((res, out))
}

/// Status of one window in a summary file.
#[derive(Debug, Serialize)]
struct WindowStatus {
    input: String,
    tag: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_order: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

impl WindowStatus {
    fn failed(input: &str, tag: &str, reason: String) -> Self {
        eprintln!("{input} [{tag}]: {reason}");
        Self { input: input.into(), tag: tag.into(), status: "failed", chosen_order: None, files: Vec::new(), reason: Some(reason) }
    }
}

struct Job {
    stem: String,
    slot: WindowSlot<f64>,
}

/// Loads every input and splits it into windows; inputs that cannot be
/// loaded or windowed become failed statuses.
fn jobs(common: &Common, res: &Resolved) -> (Vec<Job>, Vec<WindowStatus>) {
    let mut jobs = Vec::new();
    let mut failed = Vec::new();
    for path in &common.input {
        let stem = stem(path);
        let slots = load(path, res.quotes).and_then(|l| Ok(window_slots(&l.series, l.calendar.as_deref(), res.window)?));
        match slots {
            Ok(slots) => jobs.extend(slots.into_iter().map(|slot| Job { stem: stem.clone(), slot })),
            Err(e) => failed.push(WindowStatus::failed(&stem, "*", format!("{e:#}"))),
        }
    }
    (jobs, failed)
}

fn window_series(slot: &WindowSlot<f64>) -> Result<&langevin_core::Series> {
    slot.series.as_ref().ok_or_else(|| anyhow!(SPARSE_REASON))
}

fn file_name(stem: &str, tag: &str, suffix: &str) -> String {
    format!("{stem}_{tag}_{suffix}")
}

fn finish(out: &OutDir, name: &str, statuses: &[WindowStatus]) -> Result<Outcome> {
    out.write_json(name, &statuses)?;
    let ok = statuses.iter().filter(|s| s.status == "ok").count();
    Ok(Outcome::from_counts(ok, statuses.len() - ok))
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let f = &file.simulate;
    let alpha = args.alpha.clone().or_else(|| f.alpha.clone()).ok_or_else(|| anyhow!("--alpha is required"))?;
    let sigma2 = args.sigma2.or(f.sigma2).ok_or_else(|| anyhow!("--sigma2 is required"))?;
    if let Some(q) = args.q.or(f.q) {
        if q != alpha.len() {
            bail!("--q {q} does not match {} drift coefficient(s)", alpha.len());
        }
    }
    let phi: Vec<f64> = std::iter::once(sigma2).chain(alpha).collect();
    let model = DriftModel::from_phi(&phi)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let grid: GridStyle = args.grid.map(Into::into).or(f.grid).unwrap_or(GridStyle::Jittered);
    let cfg = EnsembleConfig {
        dt: args.dt.or(f.dt).unwrap_or(DEFAULT_SIM_DT),
        s0: args.s0.or(f.s0).unwrap_or(1.0),
        ..EnsembleConfig::new(args.n.or(f.n).unwrap_or(1), args.len.or(f.len).unwrap_or(1000), grid, seed)
    };
    let names: Vec<String> =
        if args.long { vec!["ensemble.csv".into()] } else { (0..cfg.count).map(|i| format!("path_{i:04}.csv")).collect() };
    let out = OutDir::new(&args.common.out, args.common.force)?;
    out.check_free(names.iter().map(String::as_str).chain(["manifest.json"]))?;

    let ens = simulate_ensemble(&model, &cfg)?;
    if args.long {
        out.write(&names[0], |w| write_long_csv(w, &ens.paths))?;
    } else {
        for (name, path) in names.iter().zip(&ens.paths) {
            out.write(name, |w| write_price_csv(w, path, None))?;
        }
    }

    #[derive(Serialize)]
    struct Manifest<'a> {
        model: &'a DriftModel<f64>,
        phi: Vec<f64>,
        seed: u64,
        ensemble: &'a EnsembleConfig<f64>,
        attempts: usize,
        rejected: usize,
        files: &'a [String],
    }
    out.write_json(
        "manifest.json",
        &Manifest { model: &model, phi, seed, ensemble: &cfg, attempts: ens.attempts, rejected: ens.rejected, files: &names },
    )?;
    println!("wrote {} path(s) to {} ({} rejected)", ens.paths.len(), args.common.out.display(), ens.rejected);
    Ok(Outcome::Success)
}

pub fn fit(args: &FitArgs) -> Result<Outcome> {
    let (res, out) = setup(&args.common)?;
    let (jobs, mut statuses) = jobs(&args.common, &res);
    let results: Vec<(Job, Result<ModelSelection<f64>>)> = jobs
        .into_par_iter()
        .map(|j| {
            let opts = FitOptions { seed: j.slot.seed(res.seed), ..res.fit };
            let r = window_series(&j.slot).and_then(|s| Ok(select_order_with(s, res.q_max, &opts)?));
            (j, r)
        })
        .collect();
    let mut histogram = vec![0usize; res.q_max];
    for (j, r) in results {
        match r {
            Ok(sel) => {
                let name = file_name(&j.stem, &j.slot.tag, "selection.json");
                out.write_json(&name, &sel)?;
                histogram[sel.chosen_order - 1] += 1;
                statuses.push(WindowStatus {
                    input: j.stem,
                    tag: j.slot.tag,
                    status: "ok",
                    chosen_order: Some(sel.chosen_order),
                    files: vec![name],
                    reason: None,
                });
            }
            Err(e) => statuses.push(WindowStatus::failed(&j.stem, &j.slot.tag, format!("{e:#}"))),
        }
    }
    if args.order_histogram {
        out.write("order_histogram.csv", |w| {
            use std::io::Write;
            writeln!(w, "q,count")?;
            for (k, c) in histogram.iter().enumerate() {
                writeln!(w, "{},{c}", k + 1)?;
            }
            Ok(())
        })?;
    }
    for s in statuses.iter().filter(|s| s.status == "ok") {
        println!("{} [{}]: q = {}", s.input, s.tag, s.chosen_order.unwrap_or_default());
    }
    finish(&out, "fit_summary.json", &statuses)
}

pub fn sample(args: &SampleArgs) -> Result<Outcome> {
    let (res, out) = setup(&args.common)?;
    if let Some(q) = args.order {
        check_qmax(q).context("--order")?;
    }
    let (jobs, mut statuses) = jobs(&args.common, &res);
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|j| {
            let seed = j.slot.seed(res.seed);
            let run = || -> Result<_> {
                let s = window_series(&j.slot)?;
                let opts = FitOptions { seed, ..res.fit };
                let fit = match args.order {
                    Some(q) => fit_mle_with(s, q, &opts)?,
                    None => select_order_with(s, res.q_max, &opts)?.chosen().clone(),
                };
                let ens = sample_posterior_at(s, &fit, &McmcConfig { seed, ..res.mcmc })?;
                let grid = default_grid(s, res.grid_points.max(2));
                let band = potential_band(&ens, &grid, &fit)?.with_observed_min(s.min_value());
                let diag = diagnostics(&ens, Some(&band));
                Ok((fit, ens, band, diag))
            };
            let r = run();
            (j, r)
        })
        .collect();
    for (j, r) in results {
        let (fit, ens, band, diag) = match r {
            Ok(x) => x,
            Err(e) => {
                statuses.push(WindowStatus::failed(&j.stem, &j.slot.tag, format!("{e:#}")));
                continue;
            }
        };
        let name = |suffix: &str| file_name(&j.stem, &j.slot.tag, suffix);
        let files = vec![name("draws.csv"), name("meta.json"), name("band.csv"), name("diagnostics.json")];
        out.write(&files[0], |w| write_draws_csv(w, &ens))?;
        #[derive(Serialize)]
        struct Meta<'a> {
            fit: &'a langevin_core::FitResult,
            #[serde(flatten)]
            sampler: langevin_core::mcmc::PosteriorMeta,
        }
        out.write_json(&files[1], &Meta { fit: &fit, sampler: ens.meta() })?;
        out.write(&files[2], |w| write_band_csv(w, &band))?;
        out.write_json(&files[3], &diag)?;
        println!(
            "{} [{}]: q = {}, {} draws, acceptance {:.3}{}",
            j.stem,
            j.slot.tag,
            fit.order,
            ens.len(),
            ens.acceptance,
            if diag.multimodal { ", multimodal" } else { "" }
        );
        statuses.push(WindowStatus { input: j.stem, tag: j.slot.tag, status: "ok", chosen_order: Some(fit.order), files, reason: None });
    }
    finish(&out, "sample_summary.json", &statuses)
}

pub fn classify(args: &ClassifyArgs) -> Result<Outcome> {
    let (res, out) = setup(&args.common)?;
    let track_cfg = res.track();
    let mut labeled = 0;
    let mut problems = 0;
    for path in &args.common.input {
        let stem = stem(path);
        let loaded = load(path, res.quotes)?;
        let track = regime_track(&loaded.series, loaded.calendar.as_deref(), &track_cfg)
            .with_context(|| format!("classifying {}", path.display()))?;
        out.write(&format!("{stem}_track.csv"), |w| write_track_csv(w, &track))?;
        out.write(&format!("{stem}_track.json"), |w| write_track_json(w, &track))?;
        for e in &track {
            match e {
                TrackEntry::Labeled(l) => {
                    labeled += 1;
                    println!("{stem} [{}]: {} (q = {})", l.tag, l.regime, l.order);
                }
                TrackEntry::Skipped { tag, reason, .. } => {
                    problems += 1;
                    eprintln!("{stem} [{tag}]: skipped: {reason}");
                }
            }
        }
    }
    Ok(Outcome::from_counts(labeled, problems))
}

fn report(verdicts: &[Verdict]) -> Outcome {
    for v in verdicts {
        println!("{}", v.line());
    }
    if verdicts.iter().all(|v| v.passed) {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

pub fn replicate(args: &ReplicateArgs) -> Result<Outcome> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let out = OutDir::new(&args.common.out, args.common.force)?;
    let seed = args.common.seed.or(file.seed);
    match args.which {
        Experiment::OrderRecovery => {
            let mut cfg = file.order_recovery.clone().unwrap_or_else(OrderRecoveryConfig::default);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.count = args.n.unwrap_or(cfg.count);
            cfg.length = args.len.unwrap_or(cfg.length);
            cfg.q_max = args.common.qmax.or(file.q_max).unwrap_or(cfg.q_max);
            out.check_free(["order_histogram.csv", "order_recovery.json"])?;
            let r = order_recovery(&cfg)?;
            out.write("order_histogram.csv", |w| r.write_histogram_csv(w))?;
            out.write_json("order_recovery.json", &r)?;
            for h in &r.histograms {
                println!("true q = {}: selected {:?}, failed {}, rejected {}", h.true_order, h.counts, h.failures, h.rejected);
            }
            Ok(report(&r.verdicts))
        }
        Experiment::ParameterRecovery => {
            let mut cfg = file.parameter_recovery.clone().unwrap_or_else(ParameterRecoveryConfig::default);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.count = args.n.unwrap_or(cfg.count);
            cfg.length = args.len.unwrap_or(cfg.length);
            out.check_free(["parameter_estimates.csv", "parameter_recovery.json"])?;
            let r = parameter_recovery(&cfg)?;
            out.write("parameter_estimates.csv", |w| r.write_estimates_csv(w))?;
            out.write_json("parameter_recovery.json", &r)?;
            for (label, set) in [("q", &r.summary), ("overfit q", &r.overfit_summary)] {
                for s in set {
                    println!("{label} = {}: {} = {:.5} ± {:.5} (truth {})", set.len() - 1, s.name, s.mean, s.std, s.truth);
                }
            }
            Ok(report(&r.verdicts))
        }
    }
}
