//! Numerical property checks: gradient exactness, landscape identities,
//! calibration and the depth oracle.

use std::f64::consts::{LN_2, PI};

use rand::Rng as _;
use scoregan_core::baselines::{depth_1d, median, DepthConfig1D};
use scoregan_core::distributions::{ar_matrix, fill_standard_normal, sample_gaussian, standard_normal, XiSampler};
use scoregan_core::gan::{calibrate_elliptical, calibration_rhs, objective_estimate, CalibrationTarget, RadialSource};
use scoregan_core::linalg::dot;
use scoregan_core::nets::{
    init_net, BaseNoise, BottomActivation, DiscriminatorPreset, Generator, GeneratorKind, MlpNet,
};
use scoregan_core::rng::{substream, Rng, Stream};
use scoregan_core::special::depth_beta;
use scoregan_core::{Matrix, ScoringRule};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity and the accepted range or target, human readable.
    pub detail: String,
}

/// Central-difference step, then smaller retries for coordinates that miss
/// the tolerance: a kink of ReLU, leaky ReLU, ramp or `abs` inside the stencil
/// spoils the difference quotient only until the step drops below its
/// distance.
const FD_STEPS: [f64; 3] = [1e-5, 1e-6, 1e-7];
const FD_TOL: f64 = 1e-4;
/// Finite-difference derivatives smaller than this are compared absolutely.
const FD_FLOOR: f64 = 1e-3;

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(FD_FLOOR)
}

/// Relative error of `analytic` against central differences of `f` around
/// the current point, `f(h)` being the objective shifted by `h`.
fn fd_err(analytic: f64, mut f: impl FnMut(f64) -> Result<f64, BenchError>) -> Result<f64, BenchError> {
    let mut best = f64::INFINITY;
    for h in FD_STEPS {
        let fd = (f(h)? - f(-h)?) / (2.0 * h);
        best = best.min(rel_err(analytic, fd));
        if best <= FD_TOL {
            break;
        }
    }
    Ok(best)
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    fill_standard_normal(rng, m.as_mut_slice());
    m
}

fn weighted_sum(out: &Matrix, up: &Matrix) -> f64 {
    dot(out.as_slice(), up.as_slice())
}

/// Central differences of `sum(up * net(x))` against backward, over every
/// parameter and input coordinate.
fn net_max_rel_err(net: &mut MlpNet, x: &Matrix, up: &Matrix) -> Result<f64, BenchError> {
    let cache = net.forward(x)?;
    let g = net.backward(&cache, up)?;
    let analytic = g.flat();
    let base = net.params_flat();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut theta = base.clone();
        let e = fd_err(a, |h| {
            theta[k] = base[k] + h;
            net.set_params_flat(&theta)?;
            Ok(weighted_sum(&net.predict(x)?, up))
        })?;
        worst = worst.max(e);
    }
    net.set_params_flat(&base)?;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let e = fd_err(g.input[(i, j)], |h| {
                let mut xp = x.clone();
                xp[(i, j)] += h;
                Ok(weighted_sum(&net.predict(&xp)?, up))
            })?;
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Same check for a generator; the noise stream is replayed for every
/// perturbed evaluation.
fn generator_max_rel_err(gen: &mut Generator, noise_seed: u64, batch: usize, up: &Matrix) -> Result<f64, BenchError> {
    let draw = |g: &Generator| g.generate(&mut substream(noise_seed, Stream::GeneratorNoise), batch);
    let (_, cache) = draw(gen)?;
    let grads = gen.backward(&cache, up)?;
    let eval = |g: &Generator| -> Result<f64, BenchError> { Ok(weighted_sum(&draw(g)?.0, up)) };
    let mut worst: f64 = 0.0;
    let a0 = gen.a.clone();
    for k in 0..a0.as_slice().len() {
        let e = fd_err(grads.a.as_slice()[k], |h| {
            let mut a = a0.clone();
            a.as_mut_slice()[k] += h;
            gen.set_a(a)?;
            eval(gen)
        })?;
        worst = worst.max(e);
    }
    gen.set_a(a0)?;
    if let Some(gt) = &grads.theta {
        let t0 = gen.theta.clone();
        for (k, &a) in gt.iter().enumerate() {
            let e = fd_err(a, |h| {
                let mut t = t0.clone();
                t[k] += h;
                gen.set_theta(t)?;
                eval(gen)
            })?;
            worst = worst.max(e);
        }
        gen.set_theta(t0)?;
    }
    if let Some(gx) = &grads.xi_net {
        let analytic = gx.flat();
        let base = gen.xi_net.as_ref().map(MlpNet::params_flat).unwrap_or_default();
        for (k, &a) in analytic.iter().enumerate() {
            let mut w = base.clone();
            let e = fd_err(a, |h| {
                w[k] = base[k] + h;
                if let Some(net) = gen.xi_net.as_mut() {
                    net.set_params_flat(&w)?;
                }
                eval(gen)
            })?;
            worst = worst.max(e);
        }
        if let Some(net) = gen.xi_net.as_mut() {
            net.set_params_flat(&base)?;
        }
    }
    Ok(worst)
}

/// Every discriminator preset and generator kind on random small instances
/// (`p <= 5`, widths `<= 8`, batch 4) for `seeds` seeds. Returns the largest
/// relative error, with derivatives below 1e-3 compared absolutely.
pub fn gradient_suite(seeds: u64) -> Result<f64, BenchError> {
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let mut rng = substream(1000 + seed, Stream::Aux);
        let p = rng.random_range(1..=5usize);
        let mut w = || rng.random_range(1..=8usize);
        let presets = [
            DiscriminatorPreset::T1 { width: w() },
            DiscriminatorPreset::T2 { width: w() },
            DiscriminatorPreset::T3 { width: w() },
            DiscriminatorPreset::T4 { relu_width: w().max(2), sigmoid_width: w() },
            DiscriminatorPreset::Deep { depth: 3, width: w(), bottom: BottomActivation::Sigmoid },
            DiscriminatorPreset::Deep { depth: 2, width: w(), bottom: BottomActivation::Ramp },
            DiscriminatorPreset::Practical,
        ];
        let batch = 4;
        for preset in &presets {
            let mut net = init_net(&mut rng, preset, p, None, 1.0)?;
            let x = gaussian_matrix(&mut rng, batch, p);
            let up = gaussian_matrix(&mut rng, batch, 1);
            worst = worst.max(net_max_rel_err(&mut net, &x, &up)?);
        }
        for kind in [GeneratorKind::G1, GeneratorKind::G2, GeneratorKind::G3, GeneratorKind::G4] {
            let a = gaussian_matrix(&mut rng, p, p);
            let mut gen = Generator::new(kind, a, BaseNoise::Gaussian, &mut rng)?;
            if kind.has_location() {
                gen.set_theta((0..p).map(|_| standard_normal(&mut rng)).collect())?;
            }
            let up = gaussian_matrix(&mut rng, batch, p);
            worst = worst.max(generator_max_rel_err(&mut gen, 2000 + seed, batch, &up)?);
        }
    }
    Ok(worst)
}

/// Log-score objective `mean log T(real) + mean log(1 - T(fake))` and its
/// parameter gradient.
fn log_objective_and_grad(net: &MlpNet, real: &Matrix, fake: &Matrix) -> Result<(f64, Vec<f64>), BenchError> {
    let score = ScoringRule::Log;
    let mut value = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for (data, event_one) in [(real, true), (fake, false)] {
        let cache = net.forward(data)?;
        let m = data.rows() as f64;
        let mut up = Matrix::zeros(data.rows(), 1);
        for (i, &t) in cache.output().as_slice().iter().enumerate() {
            let t = scoregan_core::scoring::clamp_t(t);
            let (s1, s0) = score.values(t)?;
            let (d1, d0) = score.derivatives_unchecked(t);
            value += if event_one { s1 } else { s0 } / m;
            up.as_mut_slice()[i] = if event_one { d1 } else { d0 } / m;
        }
        for (g, d) in grad.iter_mut().zip(net.backward(&cache, &up)?.flat()) {
            *g += d;
        }
    }
    Ok((value, grad))
}

/// Maximizes the log-score objective between `N(0, diag(2, 1))` and
/// `N(0, I)` over a width-8 sigmoid-sigmoid network without biases, with 200
/// plain gradient-ascent steps on `n` Monte Carlo draws per side. Returns the
/// final objective.
pub fn flat_landscape(n: usize, seed: u64) -> Result<f64, BenchError> {
    let mut rng = substream(seed, Stream::Data);
    let real = sample_gaussian(&mut rng, &[0.0, 0.0], &scoregan_core::SymMatrix::from_diag(&[2.0, 1.0]), n)?;
    let fake = gaussian_matrix(&mut rng, n, 2);
    let mut net = init_net(&mut substream(seed, Stream::NetInit), &DiscriminatorPreset::T1 { width: 8 }, 2, None, 1.0)?;
    if let Some(head) = net.layers_mut().last_mut() {
        head.weight.as_mut_slice().iter_mut().for_each(|w| *w *= 0.1);
    }
    const STEPS: usize = 200;
    const LR: f64 = 1.0;
    let mut theta = net.params_flat();
    for _ in 0..STEPS {
        let (_, g) = log_objective_and_grad(&net, &real, &fake)?;
        theta.iter_mut().zip(&g).for_each(|(t, d)| *t += LR * d);
        net.set_params_flat(&theta)?;
    }
    Ok(log_objective_and_grad(&net, &real, &fake)?.0)
}

/// One-dimensional T2 landscape: data from `(1 - eps) N(0, sigma^2) + eps
/// N(0, tau^2)`, generator `N(0, gamma^2)`. For each grid value of
/// `gamma^2` the head weights of a two-unit ReLU network (`u = +-1`) are fit
/// by damped Newton ascent on the log-score objective; the returned value is
/// the grid point with the smallest fitted objective.
pub fn t2_minimizer(sigma: f64, tau: f64, eps: f64, n: usize, grid: &[f64], seed: u64) -> Result<f64, BenchError> {
    let mut rng = substream(seed, Stream::Data);
    let real: Vec<f64> = (0..n)
        .map(|_| {
            let sd = if rng.random::<f64>() < eps { tau } else { sigma };
            sd * standard_normal(&mut rng)
        })
        .collect();
    let mut z = vec![0.0; n];
    fill_standard_normal(&mut rng, &mut z);
    let feats = |x: f64| [x.max(0.0), (-x).max(0.0)];
    let real_f: Vec<[f64; 2]> = real.iter().map(|&x| feats(x)).collect();
    let z_f: Vec<[f64; 2]> = z.iter().map(|&x| feats(x)).collect();

    let mut net = DiscriminatorPreset::T2 { width: 2 }.build(1, None)?;
    net.layers_mut()[0].weight.as_mut_slice().copy_from_slice(&[1.0, -1.0]);
    let real_m = Matrix::from_vec(n, 1, real)?;

    let mut best = (f64::INFINITY, f64::NAN);
    for &g2 in grid {
        let gamma = g2.sqrt();
        let fake_f: Vec<[f64; 2]> = z_f.iter().map(|f| [gamma * f[0], gamma * f[1]]).collect();
        let w = newton_logistic(&real_f, &fake_f)?;
        let head = net.layers_mut().last_mut().expect("two layers");
        head.weight.as_mut_slice().copy_from_slice(&w);
        let fake_m = Matrix::from_vec(n, 1, z.iter().map(|v| gamma * v).collect())?;
        let value = objective_estimate(&net, &ScoringRule::Log, &real_m, &fake_m)?;
        if value < best.0 {
            best = (value, g2);
        }
    }
    Ok(best.1)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maximizes `mean log s(w.a) + mean log(1 - s(w.b))` over `w` in R^2.
fn newton_logistic(real: &[[f64; 2]], fake: &[[f64; 2]]) -> Result<[f64; 2], BenchError> {
    let value = |w: [f64; 2]| -> f64 {
        let lr: f64 = real.iter().map(|a| -softplus(-(w[0] * a[0] + w[1] * a[1]))).sum::<f64>();
        let lf: f64 = fake.iter().map(|b| -softplus(w[0] * b[0] + w[1] * b[1])).sum::<f64>();
        lr / real.len() as f64 + lf / fake.len() as f64
    };
    let mut w = [0.0; 2];
    for _ in 0..100 {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (set, sign) in [(real, 1.0), (fake, -1.0)] {
            let m = set.len() as f64;
            for a in set {
                let s = sigmoid(w[0] * a[0] + w[1] * a[1]);
                let coef = if sign > 0.0 { 1.0 - s } else { -s };
                let c = s * (1.0 - s) / m;
                for i in 0..2 {
                    g[i] += coef * a[i] / m;
                    for j in 0..2 {
                        h[i][j] -= c * a[i] * a[j];
                    }
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step = [
            -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
            -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
        ];
        let f0 = value(w);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-8 {
            let cand = [w[0] + t * step[0], w[1] + t * step[1]];
            if value(cand) >= f0 {
                w = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (step[0].abs() + step[1].abs()) * t < 1e-12 {
            break;
        }
    }
    if !(w[0].is_finite() && w[1].is_finite()) {
        return Err(BenchError::Estimator("Newton ascent diverged".into()));
    }
    Ok(w)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Sample mean and standard error.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let (m, s) = crate::runner::mean_std(v);
    (m, s / (v.len() as f64).sqrt())
}

/// `mean sigmoid(u^T X)` for `X ~ N(0, Sigma_ar)` in `R^3` and a random `u`;
/// `(mean, standard error)`.
pub fn sigmoid_half(n: usize, seed: u64) -> Result<(f64, f64), BenchError> {
    let mut rng = substream(seed, Stream::Data);
    let x = sample_gaussian(&mut rng, &[0.0; 3], &ar_matrix(3, 0.5), n)?;
    let u: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
    let v: Vec<f64> = x.row_iter().map(|r| sigmoid(dot(r, &u))).collect();
    Ok(mean_se(&v))
}

/// `mean ReLU(X)` for `X ~ N(0, gamma^2)`; `(mean, standard error)`.
pub fn relu_moment(gamma: f64, n: usize, seed: u64) -> Result<(f64, f64), BenchError> {
    let mut rng = substream(seed, Stream::Data);
    let v: Vec<f64> = (0..n).map(|_| (gamma * standard_normal(&mut rng)).max(0.0)).collect();
    Ok(mean_se(&v))
}

/// Composite Simpson estimate of `E min(|Z|, 1)`, `Z ~ N(0, 1)`, split at the
/// kink and truncated at 12.
pub fn clipped_moment_simpson(panels: usize) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let n = panels + panels % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    };
    2.0 * (simpson(&|z| z * phi(z), 0.0, 1.0) + simpson(&phi, 1.0, 12.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationCheck {
    pub a: f64,
    pub rhs: f64,
    pub oracle: f64,
}

/// Calibrates Gaussian-implied radii in dimension `r`, which should give
/// `a = 1`, and compares the calibration constant with the Simpson oracle.
pub fn calibration_check(r: usize, draws: usize, seed: u64) -> Result<CalibrationCheck, BenchError> {
    let a = calibrate_elliptical(
        RadialSource::Sampler(&XiSampler::GaussianImplied),
        r,
        &mut substream(seed, Stream::Calibration),
        CalibrationTarget::Gaussian,
        draws,
    )?;
    Ok(CalibrationCheck {
        a,
        rhs: calibration_rhs(CalibrationTarget::Gaussian)?,
        oracle: clipped_moment_simpson(200_000),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCheck {
    pub minimizer: f64,
    /// `median(x^2) / beta` with `beta` from an independent normal quantile.
    pub target: f64,
    pub step: f64,
    pub beta_library: f64,
    pub beta_oracle: f64,
}

/// Depth grid minimizer on `n` draws of `N(0, gamma2)`.
pub fn depth_check(gamma2: f64, n: usize, seed: u64) -> Result<DepthCheck, BenchError> {
    let mut rng = substream(seed, Stream::Data);
    let sd = gamma2.sqrt();
    let x: Vec<f64> = (0..n).map(|_| sd * standard_normal(&mut rng)).collect();
    let cfg = DepthConfig1D::uniform(0.25 * gamma2, 3.0 * gamma2, 1101);
    let step = cfg.grid[1] - cfg.grid[0];
    let fit = depth_1d(&x, &cfg)?;
    let q = Normal::standard().inverse_cdf(0.75);
    let beta_oracle = q * q;
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    Ok(DepthCheck {
        minimizer: fit.gamma2_hat,
        target: median(&mut sq) / beta_oracle,
        step,
        beta_library: depth_beta(),
        beta_oracle,
    })
}

/// Grid `lo, lo + step, ..., hi`.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| lo + step * i as f64).collect()
}

/// Runs every check with its acceptance range.
pub fn property_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<(bool, String), BenchError>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        out.push(CheckResult { name: name.into(), passed, detail });
    };
    push(
        "gradient_suite",
        gradient_suite(20).map(|e| (e <= FD_TOL, format!("max relative error {e:.3e} (limit {FD_TOL:e})"))),
    );
    let target = -2.0 * LN_2;
    push(
        "flat_landscape",
        flat_landscape(200_000, 11).map(|v| {
            let ok = v >= target - 0.001 && v <= target + 0.02;
            (ok, format!("max objective {v:.6} (range [{:.6}, {:.6}])", target - 0.001, target + 0.02))
        }),
    );
    let expected = (1.0 - 0.2) * 1.0 + 0.2 * 5.0;
    let expected = expected * expected;
    push(
        "t2_minimizer",
        t2_minimizer(1.0, 5.0, 0.2, 400_000, &grid(0.5, 6.0, 0.05), 12).map(|g| {
            let ok = g >= 0.85 * expected && g <= 1.15 * expected;
            (ok, format!("argmin gamma^2 = {g:.3} (target {expected:.2} +-15%)"))
        }),
    );
    push(
        "sigmoid_half",
        sigmoid_half(200_000, 13).map(|(m, se)| ((m - 0.5).abs() <= 3.0 * se, format!("mean {m:.5}, se {se:.1e}"))),
    );
    let gamma = 1.7;
    push(
        "relu_moment",
        relu_moment(gamma, 200_000, 14).map(|(m, se)| {
            let want = gamma / (2.0 * PI).sqrt();
            ((m - want).abs() <= 3.0 * se, format!("mean {m:.5} vs {want:.5}, se {se:.1e}"))
        }),
    );
    push(
        "calibration",
        calibration_check(5, 1_000_000, 15).map(|c| {
            let ok = (c.a - 1.0).abs() <= 0.03 && (c.rhs - c.oracle).abs() <= 1e-3 && (c.oracle - 0.6313).abs() <= 1e-3;
            (ok, format!("a = {:.4}, constant {:.6}, oracle {:.6}", c.a, c.rhs, c.oracle))
        }),
    );
    push(
        "depth_oracle",
        depth_check(2.0, 10_000, 16).map(|d| {
            let ok = (d.minimizer - d.target).abs() <= d.step && (d.beta_library - d.beta_oracle).abs() <= 1e-6;
            (ok, format!("minimizer {:.4}, median/beta {:.4}, step {:.4}", d.minimizer, d.target, d.step))
        }),
    );
    out
}
