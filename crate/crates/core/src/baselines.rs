//! Classical scatter estimators: Tyler's M-estimator, scaled Kendall's tau and
//! the sample covariance, plus the one-dimensional matrix-depth oracle.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::distributions::{centered_second_moment, select_pairs};
use crate::linalg::{cholesky, Matrix, SymMatrix};
use crate::math;
use crate::rng::Rng;
use crate::special::depth_beta;
use crate::{Error, Result};

pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TylerConfig {
    pub max_iter: usize,
    /// Relative Frobenius change between iterates.
    pub tol: f64,
}

impl Default for TylerConfig {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TylerFit {
    /// Scatter normalized to trace `p`.
    pub scatter: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Rows that were exactly zero and therefore skipped.
    pub dropped_rows: usize,
}

/// Tyler's M-estimator of scatter (location assumed zero), trace `p`.
pub fn tyler_m(data: &Matrix, cfg: &TylerConfig) -> Result<SymMatrix> {
    tyler_m_fit(data, cfg).map(|f| f.scatter)
}

/// Fixed-point iteration `S <- (p/n) sum x x^T / (x^T S^{-1} x)` from the
/// identity, renormalized to trace `p` each step.
pub fn tyler_m_fit(data: &Matrix, cfg: &TylerConfig) -> Result<TylerFit> {
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let p = data.cols();
    let rows: Vec<&[f64]> = data.row_iter().filter(|r| r.iter().any(|&x| x != 0.0)).collect();
    let dropped_rows = data.rows() - rows.len();
    let n = rows.len();
    if p == 0 || n <= p {
        return Err(Error::Domain(format!("Tyler needs n > p nonzero rows, got n = {n}, p = {p}")));
    }
    let mut sigma = SymMatrix::identity(p);
    let mut y = vec![0.0; p];
    for it in 1..=cfg.max_iter {
        let l = cholesky(&sigma).map_err(|_| Error::Singular { iteration: it })?;
        let mut acc = Matrix::zeros(p, p);
        for x in &rows {
            // x^T S^{-1} x = ||L^{-1} x||^2
            for i in 0..p {
                let mut s = x[i];
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            let q: f64 = y.iter().map(|v| v * v).sum();
            if q <= 0.0 || !q.is_finite() {
                return Err(Error::Singular { iteration: it });
            }
            let w = 1.0 / q;
            for a in 0..p {
                let xa = w * x[a];
                for b in a..p {
                    acc[(a, b)] += xa * x[b];
                }
            }
        }
        let mut next = SymMatrix::from_fn(p, |a, b| acc[(a, b)]);
        let tr = next.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::Singular { iteration: it });
        }
        next = next.scale(p as f64 / tr);
        let change = next.sub(&sigma).as_matrix().frobenius_norm() / next.as_matrix().frobenius_norm();
        sigma = next;
        if change <= cfg.tol {
            return Ok(TylerFit {
                scatter: sigma,
                iterations: it,
                converged: true,
                dropped_rows,
            });
        }
    }
    Ok(TylerFit {
        scatter: sigma,
        iterations: cfg.max_iter,
        converged: false,
        dropped_rows,
    })
}

/// Kendall's tau matrix `tau_jk` over the selected pairs.
pub fn kendall_tau_matrix(data: &Matrix, rng: &mut Rng, pair_budget: usize) -> Result<SymMatrix> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::Domain(format!("Kendall's tau needs n >= 2, got {n}")));
    }
    if pair_budget == 0 {
        return Err(Error::InvalidConfig("pair budget must be positive".into()));
    }
    let p = data.cols();
    let pairs = select_pairs(n, rng, pair_budget);
    let mut acc = vec![0i64; p * p];
    let mut s = vec![0i8; p];
    for &(i, j) in &pairs {
        for ((sk, a), b) in s.iter_mut().zip(data.row(i)).zip(data.row(j)) {
            *sk = if a > b {
                1
            } else if a < b {
                -1
            } else {
                0
            };
        }
        for a in 0..p {
            if s[a] == 0 {
                continue;
            }
            let row = &mut acc[a * p..(a + 1) * p];
            for b in a..p {
                row[b] += (s[a] * s[b]) as i64;
            }
        }
    }
    let m = pairs.len() as f64;
    Ok(SymMatrix::from_fn(p, |a, b| acc[a * p + b] as f64 / m))
}

/// `(1/beta) S^{1/2} K S^{1/2}` with `K_jk = sin(pi tau_jk / 2)`,
/// `S_jj = median_i X_ij^2` and `beta` the median of chi-square(1), so that
/// Gaussian data yields its covariance.
pub fn scaled_kendall_tau(data: &Matrix, rng: &mut Rng, pair_budget: usize) -> Result<SymMatrix> {
    let tau = kendall_tau_matrix(data, rng, pair_budget)?;
    let p = data.cols();
    let k = SymMatrix::from_fn(p, |a, b| {
        if a == b {
            1.0
        } else {
            math::sin(core::f64::consts::FRAC_PI_2 * tau.as_matrix()[(a, b)])
        }
    });
    let beta = depth_beta();
    let mut col = vec![0.0; data.rows()];
    let sd: Vec<f64> = (0..p)
        .map(|j| {
            for (c, r) in col.iter_mut().zip(data.row_iter()) {
                *c = r[j] * r[j];
            }
            math::sqrt(median(&mut col) / beta)
        })
        .collect();
    Ok(k.congruence_diag(&sd))
}

/// Covariance about the sample mean, divisor `n`.
pub fn sample_covariance(data: &Matrix) -> Result<SymMatrix> {
    if data.rows() < 2 {
        return Err(Error::Domain(format!("sample covariance needs n >= 2, got {}", data.rows())));
    }
    Ok(centered_second_moment(data))
}

/// Median with the midpoint convention for even lengths. Reorders `v`.
pub fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    v.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthConfig1D {
    pub beta_const: f64,
    pub grid: Vec<f64>,
}

impl DepthConfig1D {
    /// `beta = Phi^{-1}(3/4)^2` with a uniform grid on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Self {
        let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
        Self {
            beta_const: depth_beta(),
            grid: (0..points).map(|k| lo + step * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthProfile {
    /// Grid point minimizing the depth objective.
    pub gamma2_hat: f64,
    /// Objective value at each grid point.
    pub profile: Vec<f64>,
}

/// One-dimensional matrix depth: minimizes over the grid
/// `max(freq{x^2 <= beta g}, freq{x^2 >= beta g})`.
///
/// Ties are broken by `|s(g)|` with `s(g) = freq{x^2 < beta g} +
/// freq{x^2 <= beta g} - 1`, which is nondecreasing in `g`; among points still
/// tied the first with `s >= 0` wins, else the last.
pub fn depth_1d(data: &[f64], cfg: &DepthConfig1D) -> Result<DepthProfile> {
    if cfg.grid.is_empty() || cfg.grid.iter().any(|&g| g.is_nan() || g <= 0.0) {
        return Err(Error::InvalidConfig("depth grid must be nonempty and positive".into()));
    }
    if data.is_empty() {
        return Err(Error::Domain("depth needs at least one observation".into()));
    }
    let mut sq: Vec<f64> = data.iter().map(|x| x * x).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let n = sq.len() as f64;
    let mut profile = Vec::with_capacity(cfg.grid.len());
    let mut balance = Vec::with_capacity(cfg.grid.len());
    for &g in &cfg.grid {
        let t = cfg.beta_const * g;
        let lt = sq.partition_point(|&v| v < t) as f64;
        let le = sq.partition_point(|&v| v <= t) as f64;
        profile.push((le / n).max((n - lt) / n));
        balance.push((lt + le) / n - 1.0);
    }
    let best = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..profile.len()).filter(|&k| profile[k] == best).collect();
    let best_bal = tied.iter().map(|&k| balance[k].abs()).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = tied.into_iter().filter(|&k| balance[k].abs() == best_bal).collect();
    let pick = tied
        .iter()
        .copied()
        .find(|&k| balance[k] >= 0.0)
        .unwrap_or(tied[tied.len() - 1]);
    Ok(DepthProfile {
        gamma2_hat: cfg.grid[pick],
        profile,
    })
}
