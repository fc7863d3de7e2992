//! Alternating SGD for the scoring-rule GAN.
//!
//! Each epoch runs `kd` discriminator ascent steps on
//! `mean S(T(x_real), 1) + mean S(T(x_fake), 0)` and then `kg` generator
//! descent steps on the fake term alone. Learning rates are multiplied by
//! `decay_alpha` every `decay_period` epochs. The scatter estimate is the
//! average of `A_t A_t^T` over the last `avg_window` epochs.
//!
//! The whole optimizer state lives in [`Trainer`], which can be serialized
//! (feature `serde`) and resumed bit for bit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::baselines::{median, scaled_kendall_tau, DEFAULT_PAIR_BUDGET};
use crate::distributions::{pair_difference_transform, sample_radii, sample_sphere_coordinate, standard_normal, XiSampler};
use crate::linalg::{clamp_eigenvalues, operator_norm, sym_eig, Matrix, SymMatrix};
use crate::math;
use crate::nets::{
    init_net, BaseNoise, ConstraintCaps, DiscriminatorPreset, Generator, GeneratorKind, MlpNet,
    XI_NET_WIDTHS,
};
use crate::rng::{substream, Rng, Stream};
use crate::scoring::{clamp_t, integrate, ScoringRule};
use crate::{Error, Result};

/// Eigenvalue floor applied to the initial scatter before taking its root.
pub const INIT_EIGEN_FLOOR: f64 = 1e-6;

/// Epoch interval at which the trace objective uses the full dataset.
pub const FULL_OBJECTIVE_EVERY: usize = 10;

/// Reference law fixing the scale of `xi` for the radial generators.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CalibrationTarget {
    Gaussian,
    StudentT { dof: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub gamma_d: f64,
    pub gamma_g: f64,
    pub batch: usize,
    pub kd: usize,
    pub kg: usize,
    pub epochs: usize,
    pub avg_window: usize,
    pub decay_alpha: f64,
    pub decay_period: usize,
    pub sigma1: f64,
    pub score: ScoringRule,
    /// The objective is `score_scale * S + score_offset`.
    pub score_scale: f64,
    pub score_offset: f64,
    pub discriminator: DiscriminatorPreset,
    /// Weight caps, re-imposed after every discriminator step.
    pub caps: Option<ConstraintCaps>,
    pub generator: GeneratorKind,
    /// Law of `Z` for G1 and G3.
    pub base_noise: BaseNoise,
    pub calibration: CalibrationTarget,
    pub calibration_draws: usize,
    /// Pairs used by the Kendall's tau initialization.
    pub pair_budget: usize,
    /// Keep `A` at its initial value.
    pub freeze_shape: bool,
}

impl TrainConfig {
    /// Hyperparameters reported for `p = 100`.
    pub fn paper_p100(generator: GeneratorKind) -> Self {
        let radial = generator.is_radial();
        Self {
            gamma_d: if radial { 0.05 } else { 0.025 },
            gamma_g: if radial { 0.025 } else { 0.1 },
            batch: 500,
            kd: 12,
            kg: 3,
            epochs: 500,
            avg_window: 25,
            decay_alpha: 0.2,
            decay_period: 200,
            sigma1: if radial { 0.025 } else { 0.0025 },
            score: ScoringRule::Log,
            score_scale: 1.0,
            score_offset: 0.0,
            discriminator: DiscriminatorPreset::Practical,
            caps: None,
            generator,
            base_noise: BaseNoise::Gaussian,
            calibration: CalibrationTarget::Gaussian,
            calibration_draws: 1_000_000,
            pair_budget: DEFAULT_PAIR_BUDGET,
            freeze_shape: false,
        }
    }

    /// Settings for `p <= 10`, `n` in the low thousands. The radial network
    /// needs larger steps to move its law away from the half-normal shape it
    /// starts with.
    pub fn desk(generator: GeneratorKind) -> Self {
        let radial = generator.is_radial();
        Self {
            gamma_d: if radial { 1.0 } else { 0.3 },
            gamma_g: if radial { 0.2 } else { 0.05 },
            batch: 250,
            sigma1: 0.025,
            ..Self::paper_p100(generator)
        }
    }

    /// Sets the score and rescales it to the log score's curvature at 1/2,
    /// `score_scale = 4 / G''(1/2) = 2^(a+b)`, so one learning rate serves the
    /// whole Beta family.
    pub fn with_normalized_score(mut self, score: ScoringRule) -> Result<Self> {
        let (a, b) = score
            .shape()
            .ok_or_else(|| Error::InvalidConfig("training needs a smooth scoring rule".into()))?;
        self.score = score;
        self.score_scale = math::powf(2.0, a + b);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.gamma_d > 0.0 && self.gamma_g > 0.0) || !self.gamma_d.is_finite() || !self.gamma_g.is_finite() {
            return bad("learning rates must be positive and finite");
        }
        if self.batch == 0 || self.kd == 0 || self.kg == 0 {
            return bad("batch, kd and kg must be at least 1");
        }
        if self.epochs == 0 || self.avg_window == 0 || self.avg_window > self.epochs {
            return bad("need 1 <= avg_window <= epochs");
        }
        if !(self.decay_alpha > 0.0 && self.decay_alpha < 1.0) {
            return bad("decay_alpha must lie in (0, 1)");
        }
        if self.decay_period == 0 {
            return bad("decay_period must be at least 1");
        }
        if self.sigma1.is_nan() || self.sigma1 <= 0.0 {
            return bad("sigma1 must be positive");
        }
        if !self.score.is_smooth() {
            return bad("training needs a smooth scoring rule");
        }
        if let ScoringRule::Beta { alpha, beta } = self.score {
            ScoringRule::beta(alpha, beta)?;
        }
        if self.score_scale <= 0.0 || !self.score_scale.is_finite() || !self.score_offset.is_finite() {
            return bad("score_scale must be positive and score_offset finite");
        }
        if self.calibration_draws == 0 || self.pair_budget == 0 {
            return bad("calibration_draws and pair_budget must be positive");
        }
        if let CalibrationTarget::StudentT { dof } = self.calibration {
            if dof.is_nan() || dof <= 0.0 {
                return bad("calibration dof must be positive");
            }
        }
        Ok(())
    }
}

/// Learning rate for the epoch following `completed` finished epochs.
pub fn learning_rate(base: f64, decay_alpha: f64, decay_period: usize, completed: usize) -> f64 {
    base * math::powf(decay_alpha, (completed / decay_period) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceEntry {
    pub epoch: usize,
    /// Objective on the last discriminator minibatch, or on the full data set
    /// every [`FULL_OBJECTIVE_EVERY`] epochs.
    pub objective: f64,
    pub full_data: bool,
    /// `||A_t A_t^T||_op`.
    pub scatter_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimationResult {
    pub scatter_hat: SymMatrix,
    /// Zero for G1 and G2.
    pub location_hat: Vec<f64>,
    /// `a` in `scatter_hat = a^{-2} * tail average`; 1 when no calibration
    /// applies.
    pub calibration_factor: f64,
    pub trace: Vec<TraceEntry>,
}

/// `(1/beta) S^{1/2} K S^{1/2}` floored at [`INIT_EIGEN_FLOOR`], returned as
/// `(Sigma_0, A_0 = V Lambda^{1/2})`.
pub fn kendall_init(data: &Matrix, rng: &mut Rng, pair_budget: usize) -> Result<(SymMatrix, Matrix)> {
    let k = scaled_kendall_tau(data, rng, pair_budget)?;
    let sigma = clamp_eigenvalues(&k, INIT_EIGEN_FLOOR)?;
    let eig = sym_eig(&sigma)?;
    let p = sigma.dim();
    let a = Matrix::from_fn(p, p, |i, j| eig.vectors[(i, j)] * math::sqrt(eig.values[j].max(0.0)));
    Ok((sigma, a))
}

/// `mean S(T(x), 1)` over `real` plus `mean S(T(x), 0)` over `fake`, with
/// `T` clamped away from 0 and 1.
pub fn objective_estimate(disc: &MlpNet, score: &ScoringRule, real: &Matrix, fake: &Matrix) -> Result<f64> {
    if real.rows() == 0 || fake.rows() == 0 {
        return Err(Error::Domain("objective needs nonempty batches".into()));
    }
    let tr = disc.predict(real)?;
    let tf = disc.predict(fake)?;
    let mut s1 = 0.0;
    for &t in tr.as_slice() {
        s1 += score.values(clamp_t(t))?.0;
    }
    let mut s0 = 0.0;
    for &t in tf.as_slice() {
        s0 += score.values(clamp_t(t))?.1;
    }
    Ok(s1 / tr.rows() as f64 + s0 / tf.rows() as f64)
}

/// Sampling source for `xi` in the calibration equation.
#[derive(Debug, Clone, Copy)]
pub enum RadialSource<'a> {
    /// `xi = |g(z)|`, `z ~ N(0, I_48)`.
    Net(&'a MlpNet),
    Sampler(&'a XiSampler),
}

/// `E min(|X|, 1)` for the one-dimensional target law, by quadrature of
/// `1 + 2 int_0^1 (t - 1) f(t) dt`.
pub fn calibration_rhs(target: CalibrationTarget) -> Result<f64> {
    let i = match target {
        CalibrationTarget::Gaussian => integrate(|t| (t - 1.0) * crate::special::normal_pdf(t), 0.0, 1.0)?,
        CalibrationTarget::StudentT { dof } => {
            if dof.is_nan() || dof <= 0.0 {
                return Err(Error::Domain(format!("dof must be positive, got {dof}")));
            }
            let log_c = math::lgamma(0.5 * (dof + 1.0))
                - math::lgamma(0.5 * dof)
                - 0.5 * math::ln(dof * core::f64::consts::PI);
            integrate(
                |t| (t - 1.0) * math::exp(log_c - 0.5 * (dof + 1.0) * math::ln_1p(t * t / dof)),
                0.0,
                1.0,
            )?
        }
    };
    Ok(1.0 + 2.0 * i)
}

/// Solves `E min(|a xi u^T U|, 1) = E_target min(|X|, 1)` for `a` with `U`
/// uniform on the sphere of `R^r`. The left side is a Monte Carlo average
/// over `draws` fixed draws; the root is found by bisection on
/// `log a in [log 1e-4, log 1e4]`.
pub fn calibrate_elliptical(
    radial: RadialSource<'_>,
    r: usize,
    rng: &mut Rng,
    target: CalibrationTarget,
    draws: usize,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one draw".into()));
    }
    let rhs = calibration_rhs(target)?;
    let xi: Vec<f64> = match radial {
        RadialSource::Sampler(s) => sample_radii(rng, s, r, draws)?,
        RadialSource::Net(net) => {
            const CHUNK: usize = 8192;
            let q = XI_NET_WIDTHS[0];
            let mut out = Vec::with_capacity(draws);
            while out.len() < draws {
                let k = CHUNK.min(draws - out.len());
                let z = Matrix::from_fn(k, q, |_, _| standard_normal(rng));
                out.extend(net.predict(&z)?.as_slice().iter().map(|v| v.abs()));
            }
            out
        }
    };
    let mut w = Vec::with_capacity(draws);
    for x in xi {
        w.push((x * sample_sphere_coordinate(rng, r)?).abs());
    }
    let f = |log_a: f64| {
        let a = math::exp(log_a);
        w.iter().map(|&v| (a * v).min(1.0)).sum::<f64>() / draws as f64 - rhs
    };
    let (mut lo, mut hi) = (math::ln(1e-4), math::ln(1e4));
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NotBracketed {
            f_low: f_lo + rhs,
            f_high: f_hi + rhs,
        });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(math::exp(0.5 * (lo + hi)))
}

/// Complete optimizer state.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trainer {
    cfg: TrainConfig,
    p: usize,
    disc: MlpNet,
    gen: Generator,
    epoch: usize,
    minibatch_rng: Rng,
    noise_rng: Rng,
    calibration_rng: Rng,
    perm: Vec<usize>,
    perm_pos: usize,
    tail_scatter: Matrix,
    tail_theta: Vec<f64>,
    tail_count: usize,
    trace: Vec<TraceEntry>,
}

impl Trainer {
    /// Kendall's tau initialization of `A` (on median-centred data for the
    /// location generators, which also start `theta` at the coordinatewise
    /// median) and a fresh discriminator.
    pub fn new(data: &Matrix, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        check_data(data)?;
        let p = data.cols();
        let mut init_rng = substream(seed, Stream::NetInit);
        let theta0 = if cfg.generator.has_location() {
            coordinate_median(data)
        } else {
            vec![0.0; p]
        };
        let centred = Matrix::from_fn(data.rows(), p, |i, j| data[(i, j)] - theta0[j]);
        let (_, a0) = kendall_init(&centred, &mut substream(seed, Stream::PairSampling), cfg.pair_budget)?;
        let disc = init_net(&mut init_rng, &cfg.discriminator, p, cfg.caps, cfg.sigma1)?;
        let mut gen = Generator::new(cfg.generator, a0, cfg.base_noise, &mut init_rng)?;
        gen.set_theta(theta0)?;
        let mut disc = disc;
        if cfg.caps.is_some() {
            disc.project_constraints();
        }
        Ok(Self {
            p,
            disc,
            gen,
            epoch: 0,
            minibatch_rng: substream(seed, Stream::Minibatch),
            noise_rng: substream(seed, Stream::GeneratorNoise),
            calibration_rng: substream(seed, Stream::Calibration),
            perm: (0..data.rows()).collect(),
            perm_pos: data.rows(),
            tail_scatter: Matrix::zeros(p, p),
            tail_theta: vec![0.0; p],
            tail_count: 0,
            trace: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    pub fn discriminator(&self) -> &MlpNet {
        &self.disc
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    /// Replaces the generator shape factor, e.g. to start from a known value.
    pub fn set_shape(&mut self, a: Matrix) -> Result<()> {
        self.gen.set_a(a)
    }

    pub fn set_location(&mut self, theta: Vec<f64>) -> Result<()> {
        self.gen.set_theta(theta)
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    fn next_batch(&mut self, data: &Matrix) -> Matrix {
        let n = self.perm.len();
        let mut idx = Vec::with_capacity(self.cfg.batch);
        while idx.len() < self.cfg.batch {
            if self.perm_pos >= n {
                self.perm.shuffle(&mut self.minibatch_rng);
                self.perm_pos = 0;
            }
            idx.push(self.perm[self.perm_pos]);
            self.perm_pos += 1;
        }
        data.select_rows(&idx)
    }

    /// One discriminator ascent step; returns the minibatch objective when
    /// `want_objective` is set.
    fn discriminator_step(&mut self, data: &Matrix, lr: f64, want_objective: bool) -> Result<Option<(Matrix, Matrix)>> {
        let m = self.cfg.batch;
        let real = self.next_batch(data);
        let (fake, _) = self.gen.generate(&mut self.noise_rng, m)?;
        let mut both = Matrix::zeros(2 * m, self.p);
        both.as_mut_slice()[..m * self.p].copy_from_slice(real.as_slice());
        both.as_mut_slice()[m * self.p..].copy_from_slice(fake.as_slice());
        let cache = self.disc.forward(&both)?;
        let t = cache.output().as_slice();
        let scale = self.cfg.score_scale / m as f64;
        let up = Matrix::from_fn(2 * m, 1, |i, _| {
            let (d1, d0) = self.cfg.score.derivatives_unchecked(clamp_t(t[i]));
            scale * if i < m { d1 } else { d0 }
        });
        let grads = self.disc.backward(&cache, &up)?;
        self.disc.apply_gradients(&grads, lr);
        if self.cfg.caps.is_some() {
            self.disc.project_constraints();
        }
        Ok(want_objective.then_some((real, fake)))
    }

    fn generator_step(&mut self, lr: f64) -> Result<()> {
        let m = self.cfg.batch;
        let (fake, gcache) = self.gen.generate(&mut self.noise_rng, m)?;
        let dcache = self.disc.forward(&fake)?;
        let t = dcache.output().as_slice();
        let scale = self.cfg.score_scale / m as f64;
        let up = Matrix::from_fn(m, 1, |i, _| scale * self.cfg.score.derivatives_unchecked(clamp_t(t[i])).1);
        let dgrads = self.disc.backward(&dcache, &up)?;
        let mut ggrads = self.gen.backward(&gcache, &dgrads.input)?;
        if self.cfg.freeze_shape {
            ggrads.a = Matrix::zeros(ggrads.a.rows(), ggrads.a.cols());
        }
        self.gen.apply_gradients(&ggrads, -lr);
        Ok(())
    }

    /// Runs one epoch.
    pub fn step_epoch(&mut self, data: &Matrix) -> Result<()> {
        if self.is_done() {
            return Err(Error::InvalidConfig("training already finished".into()));
        }
        if data.cols() != self.p || data.rows() != self.perm.len() {
            return Err(Error::DimensionMismatch {
                context: "training data".into(),
                expected: self.p,
                found: data.cols(),
            });
        }
        let lr_d = learning_rate(self.cfg.gamma_d, self.cfg.decay_alpha, self.cfg.decay_period, self.epoch);
        let lr_g = learning_rate(self.cfg.gamma_g, self.cfg.decay_alpha, self.cfg.decay_period, self.epoch);
        let epoch = self.epoch + 1;
        let mut last = None;
        for k in 0..self.cfg.kd {
            last = self.discriminator_step(data, lr_d, k + 1 == self.cfg.kd)?;
        }
        let (real, fake) = last.expect("kd >= 1");
        let full = epoch.is_multiple_of(FULL_OBJECTIVE_EVERY);
        let objective = objective_estimate(&self.disc, &self.cfg.score, if full { data } else { &real }, &fake)?
            * self.cfg.score_scale
            + self.cfg.score_offset;
        for _ in 0..self.cfg.kg {
            self.generator_step(lr_g)?;
        }
        if !objective.is_finite() || !self.gen.a.is_finite() || self.gen.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { epoch });
        }
        let aat = self.gen.a.matmul_t(&self.gen.a);
        let nrm = operator_norm(&self.gen.a);
        self.trace.push(TraceEntry {
            epoch,
            objective,
            full_data: full,
            scatter_norm: nrm * nrm,
        });
        if epoch + self.cfg.avg_window > self.cfg.epochs {
            self.tail_scatter = self.tail_scatter.add(&aat);
            for (s, t) in self.tail_theta.iter_mut().zip(&self.gen.theta) {
                *s += t;
            }
            self.tail_count += 1;
        }
        self.epoch = epoch;
        Ok(())
    }

    /// Runs epochs until `epoch` (capped at the configured total).
    pub fn run_until(&mut self, data: &Matrix, epoch: usize) -> Result<()> {
        while self.epoch < epoch.min(self.cfg.epochs) {
            self.step_epoch(data)?;
        }
        Ok(())
    }

    pub fn run(&mut self, data: &Matrix) -> Result<()> {
        self.run_until(data, self.cfg.epochs)
    }

    /// Tail averages, calibrated for the radial generators.
    pub fn finish(&self) -> Result<EstimationResult> {
        if !self.is_done() || self.tail_count == 0 {
            return Err(Error::InvalidConfig("training has not finished".into()));
        }
        let inv = 1.0 / self.tail_count as f64;
        let avg = SymMatrix::symmetrize(&self.tail_scatter.scale(inv))?;
        let min_eig = sym_eig(&avg)?.values.last().copied().unwrap_or(0.0);
        if min_eig < -1e-9 * avg.as_matrix().max_abs().max(1.0) {
            return Err(Error::Internal(format!("tail average has eigenvalue {min_eig}")));
        }
        let location_hat = if self.cfg.generator.has_location() {
            self.tail_theta.iter().map(|t| t * inv).collect()
        } else {
            vec![0.0; self.p]
        };
        let calibration_factor = match &self.gen.xi_net {
            Some(net) => calibrate_elliptical(
                RadialSource::Net(net),
                self.gen.a.cols(),
                &mut self.calibration_rng.clone(),
                self.cfg.calibration,
                self.cfg.calibration_draws,
            )?,
            None => 1.0,
        };
        Ok(EstimationResult {
            scatter_hat: avg.scale(1.0 / (calibration_factor * calibration_factor)),
            location_hat,
            calibration_factor,
            trace: self.trace.clone(),
        })
    }
}

fn check_data(data: &Matrix) -> Result<()> {
    if data.rows() < 2 || data.cols() == 0 {
        return Err(Error::Domain(format!(
            "training needs at least two observations, got {} x {}",
            data.rows(),
            data.cols()
        )));
    }
    if !data.is_finite() {
        return Err(Error::Domain("training data contains non-finite values".into()));
    }
    Ok(())
}

fn coordinate_median(data: &Matrix) -> Vec<f64> {
    let mut col = vec![0.0; data.rows()];
    (0..data.cols())
        .map(|j| {
            for (c, r) in col.iter_mut().zip(data.row_iter()) {
                *c = r[j];
            }
            median(&mut col)
        })
        .collect()
}

/// Runs the scatter estimator to completion.
pub fn train(data: &Matrix, cfg: &TrainConfig, seed: u64) -> Result<EstimationResult> {
    let mut t = Trainer::new(data, cfg.clone(), seed)?;
    t.run(data)?;
    t.finish()
}

/// Joint location and scatter; needs a G3 or G4 generator.
pub fn train_joint(data: &Matrix, cfg: &TrainConfig, seed: u64) -> Result<EstimationResult> {
    if !cfg.generator.has_location() {
        return Err(Error::InvalidConfig("joint estimation needs a G3 or G4 generator".into()));
    }
    train(data, cfg, seed)
}

/// Scatter from pairwise differences `(X_i - X_j)/sqrt(2)`, which removes
/// the unknown location; at most `pair_budget` pairs.
pub fn train_ustat(data: &Matrix, cfg: &TrainConfig, seed: u64, pair_budget: usize) -> Result<EstimationResult> {
    if cfg.generator.has_location() {
        return Err(Error::InvalidConfig("U-statistic path needs a G1 or G2 generator".into()));
    }
    check_data(data)?;
    let diffs = pair_difference_transform(data, &mut substream(seed, Stream::Aux), pair_budget)?;
    train(&diffs, cfg, seed)
}
