//! Experiment specifications and their flat `key = value` file format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use scoregan_core::distributions::{ar_matrix, ContaminationScenario, Distribution};
use scoregan_core::gan::TrainConfig;
use scoregan_core::nets::GeneratorKind;
use scoregan_core::{ScoringRule, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Law of the clean component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    /// Multivariate t with `v` degrees of freedom.
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Identity,
    /// `(1/2)^|j-k|`.
    Ar,
}

/// Contaminating law `Q`, parameterized by the spec's `s`, `c` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminantKind {
    /// `N(s 1, c I)`.
    Gaussian,
    /// Point mass at `s 1`.
    Dirac,
    /// `T_v(s 1, c I)`.
    T,
}

/// Hyperparameter set used for every GAN estimator in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    SampleCov,
    Kendall,
    Tyler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSpec {
    Baseline(Baseline),
    Gan {
        generator: GeneratorKind,
        score: ScoringRule,
        /// Train on pairwise differences instead of the raw sample.
        ustat: bool,
    },
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline(Baseline::SampleCov) => f.write_str("sample_cov"),
            Self::Baseline(Baseline::Kendall) => f.write_str("kendall"),
            Self::Baseline(Baseline::Tyler) => f.write_str("tyler"),
            Self::Gan { generator, score, ustat } => {
                let g = match generator {
                    GeneratorKind::G1 => "g1",
                    GeneratorKind::G2 => "g2",
                    GeneratorKind::G3 => "g3",
                    GeneratorKind::G4 => "g4",
                };
                let u = if *ustat { "ustat_" } else { "" };
                write!(f, "gan_{u}{g}")?;
                if *score != ScoringRule::Log {
                    write!(f, ":{score}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = BenchError;

    /// `sample_cov`, `kendall`, `tyler`, `gan_g1` .. `gan_g4`, `gan_ustat_g1`,
    /// `gan_ustat_g2`, each GAN optionally suffixed with `:<score>`.
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.trim();
        let (name, score) = match s.split_once(':') {
            Some((n, sc)) => (n, sc.parse::<ScoringRule>().map_err(|e| BenchError::Config(e.to_string()))?),
            None => (s, ScoringRule::Log),
        };
        let gan = |generator, ustat| Self::Gan { generator, score, ustat };
        let out = match name {
            "sample_cov" => Self::Baseline(Baseline::SampleCov),
            "kendall" => Self::Baseline(Baseline::Kendall),
            "tyler" => Self::Baseline(Baseline::Tyler),
            "gan_g1" => gan(GeneratorKind::G1, false),
            "gan_g2" => gan(GeneratorKind::G2, false),
            "gan_g3" => gan(GeneratorKind::G3, false),
            "gan_g4" => gan(GeneratorKind::G4, false),
            "gan_ustat_g1" => gan(GeneratorKind::G1, true),
            "gan_ustat_g2" => gan(GeneratorKind::G2, true),
            _ => return Err(BenchError::Config(format!("unknown estimator {s:?}"))),
        };
        if matches!(out, Self::Baseline(_)) && s.contains(':') {
            return Err(BenchError::Config(format!("{name} takes no score")));
        }
        if !score.is_smooth() {
            return Err(BenchError::Config(format!("{s}: training needs a smooth score")));
        }
        Ok(out)
    }
}

/// One experiment: a contamination scenario, a sample size and the estimators
/// compared on each of `trials` seeded replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment_id: String,
    pub family: Family,
    pub sigma: SigmaKind,
    /// Every coordinate of the clean location.
    pub theta: f64,
    pub eps: f64,
    pub contaminant: ContaminantKind,
    /// Contaminant location coordinate.
    pub s: f64,
    /// Contaminant scale for the Gaussian and t kinds.
    pub c: f64,
    /// Degrees of freedom of every t law in the scenario.
    pub v: f64,
    pub n: usize,
    pub p: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub trials: usize,
    pub master_seed: u64,
    pub profile: Profile,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment_id: "experiment".into(),
            family: Family::Gaussian,
            sigma: SigmaKind::Ar,
            theta: 0.0,
            eps: 0.2,
            contaminant: ContaminantKind::Gaussian,
            s: 5.0,
            c: 5.0,
            v: 4.0,
            n: 5000,
            p: 10,
            estimators: vec![
                EstimatorSpec::Gan { generator: GeneratorKind::G1, score: ScoringRule::Log, ustat: false },
                EstimatorSpec::Baseline(Baseline::Kendall),
                EstimatorSpec::Baseline(Baseline::Tyler),
            ],
            trials: 5,
            master_seed: 42,
            profile: Profile::Desk,
        }
    }
}

/// Sweepable fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    P,
    Eps,
    S,
    V,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::P => "p",
            Self::Eps => "eps",
            Self::S => "s",
            Self::V => "v",
        }
    }
}

impl FromStr for Axis {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Ok(match s.trim() {
            "n" => Self::N,
            "p" => Self::P,
            "eps" => Self::Eps,
            "s" => Self::S,
            "v" => Self::V,
            other => return Err(BenchError::Config(format!("unknown sweep axis {other:?}"))),
        })
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.parse()
        .map_err(|_| BenchError::Config(format!("{key}: cannot parse {v:?}")))
}

impl ExperimentSpec {
    /// Parses `key = value` lines. `#` starts a comment; keys not given keep
    /// their defaults; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if seen.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(BenchError::Config(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        let mut spec = Self::default();
        for (k, v) in &seen {
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Assigns one field from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), BenchError> {
        let bad = |what: &str| BenchError::Config(format!("{key}: unknown {what} {v:?}"));
        match key {
            "experiment_id" => self.experiment_id = v.to_string(),
            "family" => {
                self.family = match v {
                    "gaussian" => Family::Gaussian,
                    "t" => Family::T,
                    _ => return Err(bad("family")),
                }
            }
            "sigma" => {
                self.sigma = match v {
                    "identity" => SigmaKind::Identity,
                    "ar" => SigmaKind::Ar,
                    _ => return Err(bad("sigma kind")),
                }
            }
            "contaminant" => {
                self.contaminant = match v {
                    "gaussian" => ContaminantKind::Gaussian,
                    "dirac" => ContaminantKind::Dirac,
                    "t" => ContaminantKind::T,
                    _ => return Err(bad("contaminant")),
                }
            }
            "profile" => {
                self.profile = match v {
                    "desk" => Profile::Desk,
                    "full" => Profile::Full,
                    _ => return Err(bad("profile")),
                }
            }
            "theta" => self.theta = parse_num(key, v)?,
            "eps" => self.eps = parse_num(key, v)?,
            "s" => self.s = parse_num(key, v)?,
            "c" => self.c = parse_num(key, v)?,
            "v" => self.v = parse_num(key, v)?,
            "n" => self.n = parse_num(key, v)?,
            "p" => self.p = parse_num(key, v)?,
            "trials" => self.trials = parse_num(key, v)?,
            "master_seed" => self.master_seed = parse_num(key, v)?,
            "estimators" => {
                self.estimators = split_top_level(v)
                    .into_iter()
                    .map(str::parse)
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(BenchError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Sets the swept field to `value`.
    pub fn with_axis(&self, axis: Axis, value: f64) -> Result<Self, BenchError> {
        let mut out = self.clone();
        let count = |x: f64| {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(BenchError::Config(format!("{}: {value} is not a count", axis.name())))
            }
        };
        match axis {
            Axis::N => out.n = count(value)?,
            Axis::P => out.p = count(value)?,
            Axis::Eps => out.eps = value,
            Axis::S => out.s = value,
            Axis::V => out.v = value,
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.p == 0 || self.n < 2 || self.trials == 0 {
            return bad("need p >= 1, n >= 2 and trials >= 1".into());
        }
        if !(0.0..1.0).contains(&self.eps) {
            return bad(format!("eps {} outside [0, 1)", self.eps));
        }
        if self.c.is_nan() || self.c <= 0.0 || !self.s.is_finite() || !self.theta.is_finite() {
            return bad("need c > 0 and finite s, theta".into());
        }
        let uses_t = self.family == Family::T || self.contaminant == ContaminantKind::T;
        if uses_t && !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("degrees of freedom v = {} must be positive", self.v));
        }
        if self.estimators.is_empty() {
            return bad("no estimators".into());
        }
        if self.experiment_id.contains(['\n', '\r']) {
            return bad("experiment_id must be a single line".into());
        }
        Ok(())
    }

    /// True scatter `Sigma`.
    pub fn true_sigma(&self) -> SymMatrix {
        match self.sigma {
            SigmaKind::Identity => SymMatrix::identity(self.p),
            SigmaKind::Ar => ar_matrix(self.p, 0.5),
        }
    }

    pub fn true_theta(&self) -> Vec<f64> {
        vec![self.theta; self.p]
    }

    pub fn scenario(&self) -> ContaminationScenario {
        let p = self.p;
        let clean = match self.family {
            Family::Gaussian => Distribution::Gaussian { mean: self.true_theta(), cov: self.true_sigma() },
            Family::T => Distribution::StudentT { dof: self.v, loc: self.true_theta(), scatter: self.true_sigma() },
        };
        let scaled_identity = SymMatrix::identity(p).scale(self.c);
        let contaminant = match self.contaminant {
            ContaminantKind::Gaussian => Distribution::Gaussian { mean: vec![self.s; p], cov: scaled_identity },
            ContaminantKind::Dirac => Distribution::Dirac(vec![self.s; p]),
            ContaminantKind::T => Distribution::StudentT { dof: self.v, loc: vec![self.s; p], scatter: scaled_identity },
        };
        ContaminationScenario { clean, contaminant, epsilon: self.eps }
    }

    /// Short scenario label used in reports.
    pub fn scenario_label(&self) -> String {
        let family = match self.family {
            Family::Gaussian => "gaussian".to_string(),
            Family::T => format!("t{}", self.v),
        };
        let sigma = match self.sigma {
            SigmaKind::Identity => "identity",
            SigmaKind::Ar => "ar",
        };
        let q = match self.contaminant {
            ContaminantKind::Gaussian => format!("gaussian(s={};c={})", self.s, self.c),
            ContaminantKind::Dirac => format!("dirac(s={})", self.s),
            ContaminantKind::T => format!("t{}(s={};c={})", self.v, self.s, self.c),
        };
        format!("{family}/{sigma}/theta={}/{q}", self.theta)
    }

    /// Training configuration for one GAN estimator, matched to the clean
    /// family: t base noise for G1/G3 and a t calibration target for G2/G4.
    pub fn train_config(&self, generator: GeneratorKind, score: ScoringRule) -> Result<TrainConfig, BenchError> {
        let base = match self.profile {
            Profile::Desk => TrainConfig::desk(generator),
            Profile::Full => TrainConfig::paper_p100(generator),
        };
        let mut cfg = base.with_normalized_score(score)?;
        if self.family == Family::T {
            cfg.base_noise = scoregan_core::nets::BaseNoise::StudentT { dof: self.v };
            cfg.calibration = scoregan_core::gan::CalibrationTarget::StudentT { dof: self.v };
        }
        Ok(cfg)
    }
}
