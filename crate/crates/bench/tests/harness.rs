use std::process::Command;

use scoregan_bench::checkpoint::{load_net, load_trainer, save_net, save_trainer};
use scoregan_bench::report::{export, read_json, to_csv_string, Format, CSV_HEADER};
use scoregan_bench::runner::{mean_std, merge_sweep};
use scoregan_bench::{run_experiment, scaling_sweep, Axis, BenchError, ExperimentSpec, TrialReport, TrialRow};
use scoregan_core::distributions::sample_gaussian;
use scoregan_core::gan::{TrainConfig, Trainer};
use scoregan_core::nets::{init_net, DiscriminatorPreset, GeneratorKind};
use scoregan_core::rng::{substream, Stream};
use scoregan_core::SymMatrix;

/// A small spec with `extra` lines applied on top.
fn small(extra: &str) -> ExperimentSpec {
    let mut s = ExperimentSpec::parse("experiment_id = small\np = 3\nn = 400\neps = 0.1\ntrials = 2").unwrap();
    for line in extra.lines() {
        let (k, v) = line.split_once('=').unwrap();
        s.set(k.trim(), v.trim()).unwrap();
    }
    s
}

#[test]
fn config_errors_are_reported() {
    for bad in [
        "p = 3\nq = 1",
        "p = 3\np = 4",
        "p three",
        "p = -1",
        "eps = 1.2",
        "family = cauchy",
        "estimators = gan_g9",
        "estimators = gan_g1:beta(1)",
        "n = 1",
        "trials = 0",
        "estimators = gan_g1:zero_one",
    ] {
        let r = ExperimentSpec::parse(bad).and_then(|s| s.validate());
        assert!(matches!(r, Err(BenchError::Config(_))), "{bad:?} gave {r:?}");
    }
    let s = ExperimentSpec::parse("# comment\n\np = 4   # trailing\nestimators = gan_g1:beta(1,0.5), kendall\n").unwrap();
    assert_eq!(s.p, 4);
    assert_eq!(s.estimators.len(), 2);
    assert_eq!(s.estimators[0].to_string(), "gan_g1:beta(1,0.5)");
}

#[test]
fn estimator_names_round_trip() {
    for name in ["sample_cov", "kendall", "tyler", "gan_g1", "gan_g2", "gan_g3", "gan_g4", "gan_ustat_g1", "gan_ustat_g2", "gan_g3:quadratic"] {
        let e: scoregan_bench::EstimatorSpec = name.parse().unwrap();
        assert_eq!(e.to_string(), name);
    }
}

#[test]
fn ar_matrix_is_exact() {
    let s = small("p = 9\nsigma = ar");
    let sigma = s.true_sigma();
    for j in 0..9 {
        for k in 0..9 {
            assert_eq!(sigma.as_matrix()[(j, k)] - 0.5f64.powi((j as i32 - k as i32).abs()), 0.0);
        }
    }
}

#[test]
fn row_count_and_aggregates() {
    let s = small("estimators = sample_cov, kendall, tyler\ntrials = 3");
    let r = run_experiment(&s).unwrap();
    assert_eq!(r.rows.len(), 3 * 3);
    assert_eq!(to_csv_string(&r).unwrap().lines().count(), 1 + 9);
    for a in &r.aggregates {
        let errs: Vec<f64> = r.rows.iter().filter(|row| row.estimator == a.estimator).map(|row| row.err_op).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64;
        assert!((a.mean_op - mean).abs() <= 1e-12);
        assert!((a.std_op - var.sqrt()).abs() <= 1e-12);
        assert_eq!((a.trials, a.failures), (3, 0));
    }
}

#[test]
fn single_trial_aggregate_is_the_trial() {
    let r = run_experiment(&small("estimators = tyler\ntrials = 1")).unwrap();
    let a = r.aggregate("tyler").unwrap();
    assert_eq!(a.mean_op, r.rows[0].err_op);
    assert_eq!(a.std_op, 0.0);
    assert_eq!(mean_std(&[2.5]), (2.5, 0.0));
}

#[test]
fn empty_report_is_header_only() {
    let csv = to_csv_string(&TrialReport::from_rows(Vec::new())).unwrap();
    assert_eq!(csv, format!("{}\n", CSV_HEADER.join(",")));
}

fn row(estimator: &str, err_op: f64, err_loc: Option<f64>) -> TrialRow {
    TrialRow {
        experiment_id: "x".into(),
        trial: 0,
        estimator: estimator.into(),
        p: 2,
        n: 10,
        eps: 0.0,
        scenario: "s".into(),
        err_op,
        err_loc,
        seconds: 0.0,
        error: None,
    }
}

#[test]
fn failures_are_excluded_from_means() {
    let r = TrialReport::from_rows(vec![row("a", 1.0, Some(0.5)), row("a", f64::NAN, Some(f64::NAN)), row("a", 3.0, Some(1.5))]);
    let a = r.aggregate("a").unwrap();
    assert_eq!((a.trials, a.failures), (3, 1));
    assert_eq!(a.mean_op, 2.0);
    assert_eq!(a.mean_loc, Some(1.0));
}

#[test]
fn json_round_trip_keeps_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    // A t family with v = 2 has no covariance, so every sample_cov row fails.
    let mut r = run_experiment(&small("family = t\nv = 2\nestimators = kendall, sample_cov")).unwrap();
    r.rows.push(row("extra", f64::INFINITY, None));
    let r = TrialReport::from_rows(r.rows);
    let failed = r.aggregate("sample_cov").unwrap();
    assert_eq!(failed.failures, 2);
    assert!(failed.mean_op.is_nan());
    let path = dir.path().join("r.json");
    export(&r, &path, Format::Json).unwrap();
    let back = read_json(&path).unwrap();
    assert_eq!(back.aggregates.len(), r.aggregates.len());
    for (a, b) in r.aggregates.iter().zip(&back.aggregates) {
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
    assert_eq!(to_csv_string(&back).unwrap(), to_csv_string(&r).unwrap());
}

#[test]
fn runs_are_reproducible() {
    let s = small("estimators = gan_g1, kendall\nn = 300");
    let strip = |r: &TrialReport| {
        let mut r = r.clone();
        r.rows.iter_mut().for_each(|row| row.seconds = 0.0);
        r
    };
    let a = scoregan_bench::runner::run_experiment_with_threads(&s, 1).unwrap();
    let b = scoregan_bench::runner::run_experiment_with_threads(&s, 2).unwrap();
    assert_eq!(to_csv_string(&strip(&a)).unwrap(), to_csv_string(&strip(&b)).unwrap());
}

#[test]
fn sweep_labels_cells() {
    let s = small("estimators = sample_cov");
    let cells = scaling_sweep(&s, Axis::N, &[200.0, 400.0]).unwrap();
    let merged = merge_sweep(&cells);
    let ids: Vec<&str> = merged.aggregates.iter().map(|a| a.experiment_id.as_str()).collect();
    assert_eq!(ids, ["small@n=200", "small@n=400"]);
    assert_eq!(cells[0].1.rows[0].n, 200);
    assert!(scaling_sweep(&s, Axis::N, &[]).is_err());
    assert!(scaling_sweep(&s, Axis::Eps, &[1.5]).is_err());
}

fn quick_config(generator: GeneratorKind) -> TrainConfig {
    TrainConfig { epochs: 12, avg_window: 4, decay_period: 5, batch: 50, calibration_draws: 5_000, ..TrainConfig::desk(generator) }
}

#[test]
fn checkpoint_resume_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_gaussian(&mut substream(3, Stream::Data), &[0.5, -1.0, 0.0], &SymMatrix::identity(3), 300).unwrap();
    for kind in [GeneratorKind::G1, GeneratorKind::G4] {
        let cfg = quick_config(kind);
        let mut straight = Trainer::new(&data, cfg.clone(), 9).unwrap();
        straight.run(&data).unwrap();

        let mut first = Trainer::new(&data, cfg, 9).unwrap();
        first.run_until(&data, 7).unwrap();
        let path = dir.path().join("trainer.json");
        save_trainer(&first, &path).unwrap();
        let mut resumed = load_trainer(&path).unwrap();
        assert_eq!(resumed.epoch(), 7);
        resumed.run(&data).unwrap();

        let (a, b) = (straight.finish().unwrap(), resumed.finish().unwrap());
        assert_eq!(a.scatter_hat.as_matrix().as_slice(), b.scatter_hat.as_matrix().as_slice());
        assert_eq!(a.location_hat, b.location_hat);
        assert_eq!(a.calibration_factor, b.calibration_factor);
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn net_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = init_net(&mut substream(4, Stream::NetInit), &DiscriminatorPreset::Practical, 4, None, 0.3).unwrap();
    let path = dir.path().join("net.json");
    save_net(&net, &path).unwrap();
    let back = load_net(&path).unwrap();
    assert_eq!(back.params_flat(), net.params_flat());
    std::fs::write(&path, "{\"layers\": []}").unwrap();
    assert!(load_net(&path).is_err());
}

fn bench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "p = 2\nwidth = 3\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(bench(&["run", "--config", c]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(bench(&["frobnicate"]).status.code(), Some(2));

    std::fs::write(&cfg, "p = 2\nn = 200\ntrials = 2\nestimators = sample_cov, kendall\n").unwrap();
    assert_eq!(bench(&["run", "--config", c, "--format", "yaml"]).status.code(), Some(2));
    let json = dir.path().join("r.json");
    let out = bench(&["run", "--config", c, "--format", "json", "--out", json.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("r.csv");
    let out = bench(&["export", "--input", json.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert_eq!(text, to_csv_string(&read_json(&json).unwrap()).unwrap());

    let out = bench(&["sweep", "--config", c, "--axis", "p", "--values", "2,3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 8);
    assert_eq!(bench(&["sweep", "--config", c, "--axis", "width", "--values", "2"]).status.code(), Some(2));
}
