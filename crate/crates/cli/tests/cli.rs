use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use langevin_core::inference::ModelSelection;
use langevin_core::mcmc::{read_band_csv, read_draws_csv, Diagnostics, PotentialBand};
use langevin_core::regimes::TrackEntry;
use langevin_core::timeseries::{parse_series, SeriesFormat};
use serde_json::Value;
use tempfile::TempDir;

fn langevin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langevin")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", s(dir)];
    args.extend_from_slice(extra);
    langevin(&args)
}

/// Writes a dated price file: hourly stamps, one block per `(year, month, values)`.
fn dated_csv(path: &Path, blocks: &[(i32, u32, Vec<f64>)]) {
    let mut text = String::from("date,price\n");
    for (y, m, vals) in blocks {
        for (i, v) in vals.iter().enumerate() {
            text.push_str(&format!("{y:04}-{m:02}-{:02}T{:02}:00:00,{v}\n", 1 + i / 24, i % 24));
        }
    }
    fs::write(path, text).unwrap();
}

fn path_values(p: &Path) -> Vec<f64> {
    parse_series::<f64, _>(fs::read(p).unwrap().as_slice(), SeriesFormat::PriceCsv).unwrap().series.values().to_vec()
}

#[test]
fn simulate_writes_paths_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = simulate_into(&out, &["--q", "3", "--alpha", "2,-1,0.01", "--sigma2", "0.05", "--n", "100", "--len", "1000", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 1);
    assert_eq!(m["phi"], serde_json::json!([0.05, 2.0, -1.0, 0.01]));
    assert!(m["rejected"].is_u64());
    assert_eq!(m["files"].as_array().unwrap().len(), 100);
    let first = path_values(&out.join("path_0000.csv"));
    assert_eq!(first.len(), 1000);
    assert_eq!(first[0], 1.0);
    assert!(out.join("path_0099.csv").exists());
}

#[test]
fn simulate_is_deterministic_and_near_constant_at_tiny_noise() {
    let tmp = TempDir::new().unwrap();
    let args = ["--q", "1", "--alpha", "0", "--sigma2", "0.0001", "--n", "1", "--len", "10"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&simulate_into(&a, &args)), 0);
    assert_eq!(code(&simulate_into(&b, &args)), 0);
    for f in ["path_0000.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let v = path_values(&a.join("path_0000.csv"));
    assert_eq!(v.len(), 10);
    assert!(v.iter().all(|x| (x - 1.0).abs() < 0.1), "{v:?}");
}

#[test]
fn simulate_long_format() {
    let tmp = TempDir::new().unwrap();
    let o = simulate_into(tmp.path(), &["--alpha", "0.01", "--sigma2", "0.0004", "--n", "3", "--len", "5", "--long"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("ensemble.csv")).unwrap();
    assert!(text.starts_with("path_id,time,value\n"));
    assert_eq!(text.lines().count(), 1 + 15);
}

#[test]
fn simulate_rejects_bad_models() {
    let tmp = TempDir::new().unwrap();
    let o = simulate_into(tmp.path(), &["--q", "2", "--alpha", "1", "--sigma2", "0.01"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("does not match"));
    let o = simulate_into(tmp.path(), &["--alpha", "1,2,3,4,5", "--sigma2", "0.01"]);
    assert_eq!(code(&o), 1);
    let o = simulate_into(tmp.path(), &["--alpha", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--sigma2"));
}

#[test]
fn simulate_reports_too_many_rejections() {
    let tmp = TempDir::new().unwrap();
    // explosive drift: every path leaves the divergence bound
    let o = simulate_into(tmp.path(), &["--alpha", "0,0,5", "--sigma2", "0.01", "--n", "2", "--len", "200", "--s0", "10"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("too many rejected"), "{}", stderr(&o));
}

#[test]
fn existing_outputs_need_force() {
    let tmp = TempDir::new().unwrap();
    let args = ["--alpha", "0", "--sigma2", "0.0001", "--len", "5"];
    assert_eq!(code(&simulate_into(tmp.path(), &args)), 0);
    fs::write(tmp.path().join("path_0000.csv"), "sentinel").unwrap();
    let o = simulate_into(tmp.path(), &args);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read_to_string(tmp.path().join("path_0000.csv")).unwrap(), "sentinel");
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&simulate_into(tmp.path(), &forced)), 0);
    assert!(fs::read_to_string(tmp.path().join("path_0000.csv")).unwrap().starts_with("time,price"));
}

#[test]
fn config_file_below_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "simulate": {"alpha": [0.1], "sigma2": 0.01, "n": 2, "len": 20}}"#).unwrap();
    let a = tmp.path().join("a");
    assert_eq!(code(&simulate_into(&a, &["--config", s(&cfg)])), 0);
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["ensemble"]["count"], 2);
    let b = tmp.path().join("b");
    assert_eq!(code(&simulate_into(&b, &["--config", s(&cfg), "--seed", "9", "--n", "1"])), 0);
    let m = json(&b.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["ensemble"]["count"], 1);
    assert_eq!(m["ensemble"]["length"], 20);

    fs::write(&cfg, r#"{"sed": 5}"#).unwrap();
    assert_eq!(code(&simulate_into(&a, &["--config", s(&cfg)])), 1);
}

fn well_paths(dir: &Path, n: &str, len: &str, seed: &str) -> Vec<PathBuf> {
    let o = simulate_into(dir, &["--alpha", "0.2,-0.002", "--sigma2", "0.0001", "--s0", "100", "--n", n, "--len", len, "--seed", seed]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let n: usize = n.parse().unwrap();
    (0..n).map(|i| dir.join(format!("path_{i:04}.csv"))).collect()
}

#[test]
fn fit_selects_orders_per_window() {
    let tmp = TempDir::new().unwrap();
    let paths = well_paths(&tmp.path().join("sim"), "5", "600", "3");
    let before: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    let out = tmp.path().join("fit");
    let mut args = vec!["fit", "--window", "whole-series", "--order-histogram", "--out", s(&out)];
    for p in &paths {
        args.extend(["--input", s(p)]);
    }
    let o = langevin(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut chosen = Vec::new();
    for i in 0..5 {
        let sel: ModelSelection<f64> =
            serde_json::from_str(&fs::read_to_string(out.join(format!("path_{i:04}_all_selection.json"))).unwrap()).unwrap();
        assert_eq!(sel.fits.len(), 4);
        for f in &sel.fits {
            assert_eq!(f.aic, -2.0 * f.log_likelihood + 2.0 * (f.order as f64 + 1.0));
        }
        chosen.push(sel.chosen_order);
    }
    let twos = chosen.iter().filter(|&&q| q == 2).count();
    assert!(twos >= 3, "{chosen:?}");

    let hist = fs::read_to_string(out.join("order_histogram.csv")).unwrap();
    let counts: Vec<usize> = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(hist.lines().next(), Some("q,count"));
    assert_eq!(counts.iter().sum::<usize>(), 5);
    assert_eq!(counts[1], twos);

    let summary = json(&out.join("fit_summary.json"));
    assert_eq!(summary.as_array().unwrap().len(), 5);
    // inputs untouched
    for (p, b) in paths.iter().zip(before) {
        assert_eq!(fs::read(p).unwrap(), b);
    }
}

#[test]
fn fit_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let good = well_paths(&tmp.path().join("sim"), "1", "300", "4").remove(0);
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();

    let o = langevin(&["fit", "--window", "whole-series", "--input", s(&empty), "--out", s(&tmp.path().join("o1"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("empty input"), "{}", stderr(&o));

    let o = langevin(&["fit", "--input", s(&good), "--out", s(&tmp.path().join("o2"))]);
    assert_eq!(code(&o), 1, "monthly windows need dates");

    let o = langevin(&["fit", "--window", "whole-series", "--input", s(&good), "--input", s(&empty), "--out", s(&tmp.path().join("o3"))]);
    assert_eq!(code(&o), 2);
    let summary = json(&tmp.path().join("o3/fit_summary.json"));
    let status: Vec<&str> = summary.as_array().unwrap().iter().map(|e| e["status"].as_str().unwrap()).collect();
    assert_eq!(status.iter().filter(|&&x| x == "ok").count(), 1);
    assert_eq!(status.len(), 2);

    let o = langevin(&["fit", "--window", "whole-series", "--qmax", "5", "--input", s(&good), "--out", s(&tmp.path().join("o4"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn fit_monthly_reports_sparse_months_as_partial() {
    let tmp = TempDir::new().unwrap();
    let sim = well_paths(&tmp.path().join("sim"), "1", "300", "5").remove(0);
    let vals = path_values(&sim);
    let input = tmp.path().join("dated.csv");
    dated_csv(&input, &[(2021, 3, vals.clone()), (2021, 4, vec![vals[0]])]);
    let out = tmp.path().join("fit");
    let o = langevin(&["fit", "--input", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(out.join("dated_2021-03_selection.json").exists());
    assert!(stderr(&o).contains("2021-04"));
}

#[test]
fn sample_emits_band_draws_and_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let input = well_paths(&tmp.path().join("sim"), "1", "800", "6").remove(0);
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = langevin(&[
            "sample", "--input", s(&input), "--window", "whole-series", "--order", "2", "--seed", "7", "--steps", "1500", "--burnin", "500",
            "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["path_0000_all_band.csv", "path_0000_all_draws.csv", "path_0000_all_diagnostics.json", "path_0000_all_meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let band: PotentialBand<f64> = read_band_csv(fs::File::open(a.join("path_0000_all_band.csv")).unwrap(), 2).unwrap();
    assert!(band.is_nested());
    assert_eq!(band.len(), 200);
    // the well at P = 100 sits below zero
    let k = band.grid.iter().position(|&p| p >= 100.0).unwrap();
    assert!(band.hi68[k] < 0.0, "{}", band.hi68[k]);

    let draws = read_draws_csv::<f64, _>(fs::File::open(a.join("path_0000_all_draws.csv")).unwrap()).unwrap();
    assert!(!draws.is_empty());
    assert!(draws.iter().all(|d| d.phi.len() == 3 && d.phi[0] > 0.0));

    let diag: Diagnostics = serde_json::from_str(&fs::read_to_string(a.join("path_0000_all_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag.order, 2);
    assert_eq!(diag.n_samples, draws.len());
    assert!(diag.mle_outside_68.is_some());
    let meta = json(&a.join("path_0000_all_meta.json"));
    assert_eq!(meta["fit"]["order"], 2);
    assert_eq!(meta["seed"], 7);
}

#[test]
fn sample_reports_bad_sampler_settings() {
    let tmp = TempDir::new().unwrap();
    let input = well_paths(&tmp.path().join("sim"), "1", "200", "8").remove(0);
    let o = langevin(&[
        "sample", "--input", s(&input), "--window", "whole-series", "--steps", "100", "--burnin", "200", "--out", s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("burn-in"), "{}", stderr(&o));
}

#[test]
fn classify_tracks() {
    let tmp = TempDir::new().unwrap();
    let well = well_paths(&tmp.path().join("w"), "1", "400", "25").remove(0);
    let o = simulate_into(&tmp.path().join("g"), &["--alpha", "0.002", "--sigma2", "0.000025", "--s0", "100", "--len", "400", "--seed", "26"]);
    assert_eq!(code(&o), 0);
    let input = tmp.path().join("stitched.csv");
    dated_csv(&input, &[(2022, 1, path_values(&well)), (2022, 2, path_values(&tmp.path().join("g/path_0000.csv")))]);

    let flags = ["--steps", "1500", "--burnin", "500", "--seed", "3"];
    let out = tmp.path().join("monthly");
    let mut args = vec!["classify", "--input", s(&input), "--out", s(&out)];
    args.extend(flags);
    let o = langevin(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("stitched_track.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "year,month,label,q,well_price");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("2022,1,") && rows[2].starts_with("2022,2,"));
    let track: Vec<TrackEntry<f64>> = serde_json::from_str(&fs::read_to_string(out.join("stitched_track.json")).unwrap()).unwrap();
    assert_eq!(track.len(), 2);
    assert!(track.iter().all(|e| e.label().is_some()));
    assert_eq!(track[1].label().unwrap().order, 1);

    let out = tmp.path().join("whole");
    let mut args = vec!["classify", "--input", s(&input), "--window", "whole-series", "--out", s(&out)];
    args.extend(flags);
    assert_eq!(code(&langevin(&args)), 0);
    assert_eq!(fs::read_to_string(out.join("stitched_track.csv")).unwrap().lines().count(), 2);

    let o = langevin(&["classify", "--input", s(&well), "--out", s(&tmp.path().join("nodates"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("invalid configuration"));
}

#[test]
fn replicate_small_runs_report_verdicts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    let o = langevin(&["replicate", "parameter-recovery", "--seed", "11", "--n", "8", "--len", "300", "--out", s(&out)]);
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let verdicts = stdout.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).count();
    assert_eq!(verdicts, 6, "{stdout}");
    assert_eq!(code(&o) == 0, !stdout.contains("FAIL "));
    let report = json(&out.join("parameter_recovery.json"));
    assert_eq!(report["config"]["count"], 8);
    assert!(fs::read_to_string(out.join("parameter_estimates.csv")).unwrap().starts_with("path,order,sigma2,alpha1"));

    let out = tmp.path().join("o");
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"order_recovery": {"true_orders": [1], "required": [1]}}"#).unwrap();
    let o = langevin(&["replicate", "order-recovery", "--config", s(&cfg), "--n", "6", "--len", "200", "--out", s(&out)]);
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    let hist = fs::read_to_string(out.join("order_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 5);
    assert!(String::from_utf8_lossy(&o.stdout).contains("order-recovery q=1"));
}
