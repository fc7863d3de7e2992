//! Seeded trials, estimator dispatch and aggregation.

use std::time::Instant;

use rayon::prelude::*;
use scoregan_core::baselines::{median, sample_covariance, scaled_kendall_tau, tyler_m, TylerConfig, DEFAULT_PAIR_BUDGET};
use scoregan_core::distributions::sample_contaminated;
use scoregan_core::gan::{train, train_joint, train_ustat};
use scoregan_core::linalg::{norm2, operator_norm, spd_inverse};
use scoregan_core::rng::{substream, trial_seed, Stream};
use scoregan_core::{Matrix, SymMatrix};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::spec::{Axis, Baseline, EstimatorSpec, ExperimentSpec, Family};
use crate::BenchError;

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment_id: String,
    pub trial: usize,
    pub estimator: String,
    pub p: usize,
    pub n: usize,
    pub eps: f64,
    pub scenario: String,
    /// `||Sigma_hat - Sigma||_op`; NaN when the estimator failed.
    #[serde(with = "crate::serde_float")]
    pub err_op: f64,
    /// `||theta_hat - theta||` for estimators that fit a location.
    #[serde(with = "crate::serde_float::option")]
    pub err_loc: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment_id: String,
    pub estimator: String,
    pub trials: usize,
    pub failures: usize,
    /// Mean and sample standard deviation over the successful trials.
    #[serde(with = "crate::serde_float")]
    pub mean_op: f64,
    #[serde(with = "crate::serde_float")]
    pub std_op: f64,
    #[serde(with = "crate::serde_float::option")]
    pub mean_loc: Option<f64>,
    #[serde(with = "crate::serde_float::option")]
    pub std_loc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<Aggregate>,
}

/// `(mean, sample sd)`; the sd of a single value is 0 and both are NaN for
/// an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl TrialReport {
    /// Aggregates recomputed from `rows`, per experiment and estimator in
    /// first-seen order.
    pub fn from_rows(rows: Vec<TrialRow>) -> Self {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &rows {
            let key = (r.experiment_id.clone(), r.estimator.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(id, name)| {
                let mine: Vec<&TrialRow> =
                    rows.iter().filter(|r| r.experiment_id == id && r.estimator == name).collect();
                let ok: Vec<f64> = mine.iter().map(|r| r.err_op).filter(|e| e.is_finite()).collect();
                let locs: Vec<f64> = mine.iter().filter_map(|r| r.err_loc).filter(|e| e.is_finite()).collect();
                let (mean_op, std_op) = mean_std(&ok);
                let (mean_loc, std_loc) = if locs.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_std(&locs);
                    (Some(m), Some(s))
                };
                Aggregate {
                    experiment_id: id,
                    estimator: name,
                    trials: mine.len(),
                    failures: mine.len() - ok.len(),
                    mean_op,
                    std_op,
                    mean_loc,
                    std_loc,
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn aggregate(&self, estimator: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.estimator == estimator)
    }
}

/// Trial concurrency from `BENCH_THREADS`; unset or 0 means rayon's default.
pub fn threads_from_env() -> Result<usize, BenchError> {
    match std::env::var("BENCH_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| BenchError::Config(format!("BENCH_THREADS: cannot parse {v:?}"))),
        Err(_) => Ok(0),
    }
}

struct Estimate {
    scatter: SymMatrix,
    location: Option<Vec<f64>>,
}

fn law_error(e: impl std::fmt::Display) -> BenchError {
    BenchError::Config(format!("reference law: {e}"))
}

/// `median(chi2_1) / median(X^2)` for one coordinate of the clean family at
/// unit scale, turning the Gaussian-calibrated Kendall scale into the family's.
fn kendall_family_factor(spec: &ExperimentSpec) -> Result<f64, BenchError> {
    match spec.family {
        Family::Gaussian => Ok(1.0),
        Family::T => {
            let z = Normal::standard().inverse_cdf(0.75);
            let t = StudentsT::new(0.0, 1.0, spec.v)
                .map_err(law_error)?
                .inverse_cdf(0.75);
            Ok((z * z) / (t * t))
        }
    }
}

/// Median of `X^T Sigma^{-1} X` for the clean family: `chi2_p`, or `p F(p, v)`.
fn mahalanobis_median(spec: &ExperimentSpec) -> Result<f64, BenchError> {
    let p = spec.p as f64;
    Ok(match spec.family {
        Family::Gaussian => ChiSquared::new(p).map_err(law_error)?.inverse_cdf(0.5),
        Family::T => p * FisherSnedecor::new(p, spec.v).map_err(law_error)?.inverse_cdf(0.5),
    })
}

/// Tyler's shape rescaled so that the sample median of the Mahalanobis
/// distances matches the clean family's.
fn calibrated_tyler(data: &Matrix, spec: &ExperimentSpec) -> Result<SymMatrix, BenchError> {
    let shape = tyler_m(data, &TylerConfig::default())?;
    let inv = spd_inverse(&shape)?;
    let mut d: Vec<f64> = data.row_iter().map(|r| inv.quad_form(r)).collect();
    let scale = median(&mut d) / mahalanobis_median(spec)?;
    Ok(shape.scale(scale))
}

fn run_estimator(est: &EstimatorSpec, data: &Matrix, spec: &ExperimentSpec, seed: u64) -> Result<Estimate, BenchError> {
    let scatter_only = |scatter| Ok(Estimate { scatter, location: None });
    match est {
        EstimatorSpec::Baseline(Baseline::SampleCov) => {
            let cov = sample_covariance(data)?;
            match spec.family {
                Family::Gaussian => scatter_only(cov),
                Family::T if spec.v > 2.0 => scatter_only(cov.scale((spec.v - 2.0) / spec.v)),
                Family::T => Err(BenchError::Estimator(format!("t{} has no covariance", spec.v))),
            }
        }
        EstimatorSpec::Baseline(Baseline::Kendall) => {
            let k = scaled_kendall_tau(data, &mut substream(seed, Stream::PairSampling), DEFAULT_PAIR_BUDGET)?;
            scatter_only(k.scale(kendall_family_factor(spec)?))
        }
        EstimatorSpec::Baseline(Baseline::Tyler) => scatter_only(calibrated_tyler(data, spec)?),
        EstimatorSpec::Gan { generator, score, ustat } => {
            let cfg = spec.train_config(*generator, *score)?;
            let res = if *ustat {
                train_ustat(data, &cfg, seed, DEFAULT_PAIR_BUDGET)?
            } else if generator.has_location() {
                train_joint(data, &cfg, seed)?
            } else {
                train(data, &cfg, seed)?
            };
            Ok(Estimate {
                scatter: res.scatter_hat,
                location: generator.has_location().then_some(res.location_hat),
            })
        }
    }
}

fn run_trial(spec: &ExperimentSpec, trial: usize, sigma: &SymMatrix) -> Result<Vec<TrialRow>, BenchError> {
    let seed = trial_seed(spec.master_seed, trial as u64);
    let (data, _) = sample_contaminated(&mut substream(seed, Stream::Data), &spec.scenario(), spec.n)?;
    let theta = spec.true_theta();
    let scenario = spec.scenario_label();
    Ok(spec
        .estimators
        .iter()
        .map(|est| {
            let start = Instant::now();
            let out = run_estimator(est, &data, spec, seed);
            let seconds = start.elapsed().as_secs_f64();
            let (err_op, err_loc, error) = match out {
                Ok(e) => {
                    let err_op = operator_norm(e.scatter.sub(sigma).as_matrix());
                    let err_loc = e.location.map(|l| {
                        let d: Vec<f64> = l.iter().zip(&theta).map(|(a, b)| a - b).collect();
                        norm2(&d)
                    });
                    (err_op, err_loc, None)
                }
                Err(e) => {
                    let loc = est_has_location(est).then_some(f64::NAN);
                    (f64::NAN, loc, Some(e.to_string()))
                }
            };
            TrialRow {
                experiment_id: spec.experiment_id.clone(),
                trial,
                estimator: est.to_string(),
                p: spec.p,
                n: spec.n,
                eps: spec.eps,
                scenario: scenario.clone(),
                err_op,
                err_loc,
                seconds,
                error,
            }
        })
        .collect())
}

fn est_has_location(est: &EstimatorSpec) -> bool {
    matches!(est, EstimatorSpec::Gan { generator, .. } if generator.has_location())
}

/// Runs every estimator on `spec.trials` seeded replicates, trials in
/// parallel (capped by `BENCH_THREADS`). Estimator failures become NaN rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<TrialReport, BenchError> {
    run_experiment_with_threads(spec, threads_from_env()?)
}

pub fn run_experiment_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<TrialReport, BenchError> {
    spec.validate()?;
    let sigma = spec.true_sigma();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let per_trial: Vec<Result<Vec<TrialRow>, BenchError>> =
        pool.install(|| (0..spec.trials).into_par_iter().map(|k| run_trial(spec, k, &sigma)).collect());
    let mut rows = Vec::with_capacity(spec.trials * spec.estimators.len());
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(TrialReport::from_rows(rows))
}

/// One report per axis value; `experiment_id` of each becomes
/// `<id>@<axis>=<value>`.
pub fn scaling_sweep(spec: &ExperimentSpec, axis: Axis, values: &[f64]) -> Result<Vec<(f64, TrialReport)>, BenchError> {
    if values.is_empty() {
        return Err(BenchError::Config("sweep needs at least one value".into()));
    }
    let threads = threads_from_env()?;
    values
        .iter()
        .map(|&v| {
            let mut cell = spec.with_axis(axis, v)?;
            cell.experiment_id = format!("{}@{}={}", spec.experiment_id, axis.name(), v);
            Ok((v, run_experiment_with_threads(&cell, threads)?))
        })
        .collect()
}

/// Concatenates sweep cells into one report with aggregates per cell.
pub fn merge_sweep(cells: &[(f64, TrialReport)]) -> TrialReport {
    TrialReport::from_rows(cells.iter().flat_map(|(_, r)| r.rows.iter().cloned()).collect())
}
