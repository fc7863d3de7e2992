//! Samplers for Gaussian, multivariate t and elliptical laws, Huber
//! contamination mixtures, and the pairwise-difference transform.
//!
//! Standard normals come from the ziggurat sampler of `rand_distr`; chi-square
//! draws from its gamma sampler. All samplers return an `n x p` row-major
//! [`Matrix`] with one observation per row.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};

use crate::linalg::{self, cholesky, Matrix, SymMatrix};
use crate::math;
use crate::rng::Rng;
use crate::{Error, Result};

/// Distribution of the radial variable `xi` in `X = theta + xi A U`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum XiSampler {
    /// `xi = ||Z||`, `Z ~ N(0, I_r)`: the law is `N(theta, A A^T)`.
    GaussianImplied,
    /// `xi = ||Z|| / sqrt(W / dof)`, `W ~ chi2(dof)`: multivariate t.
    TImplied { dof: f64 },
    /// Explicit radii, consumed in order; at least `n` values are required.
    Custom(Vec<f64>),
}

/// `X = theta + xi A U` with `U` uniform on the unit sphere of `R^r`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipticalModel {
    pub location: Vec<f64>,
    /// `p x r` shape factor `A`.
    pub shape: Matrix,
    pub xi: XiSampler,
}

/// Sampling handle for the clean and contaminating components of a mixture.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Distribution {
    Gaussian { mean: Vec<f64>, cov: SymMatrix },
    StudentT { dof: f64, loc: Vec<f64>, scatter: SymMatrix },
    Elliptical(EllipticalModel),
    Dirac(Vec<f64>),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::StudentT { loc, .. } => loc.len(),
            Self::Elliptical(m) => m.location.len(),
            Self::Dirac(x) => x.len(),
        }
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Matrix> {
        match self {
            Self::Gaussian { mean, cov } => sample_gaussian(rng, mean, cov, n),
            Self::StudentT { dof, loc, scatter } => sample_mvt(rng, *dof, loc, scatter, n),
            Self::Elliptical(m) => sample_elliptical(rng, m, n),
            Self::Dirac(x) => {
                let mut out = Matrix::zeros(n, x.len());
                for i in 0..n {
                    out.row_mut(i).copy_from_slice(x);
                }
                Ok(out)
            }
        }
    }
}

/// `(1 - epsilon) clean + epsilon contaminant`, one Bernoulli draw per row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContaminationScenario {
    pub clean: Distribution,
    pub contaminant: Distribution,
    pub epsilon: f64,
}

#[inline]
pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_standard_normal(rng: &mut Rng, out: &mut [f64]) {
    for x in out {
        *x = StandardNormal.sample(rng);
    }
}

fn check_dim(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        })
    }
}

/// Rows i.i.d. `N(mean, cov)` as `mean + L z` with `L L^T = cov`.
pub fn sample_gaussian(rng: &mut Rng, mean: &[f64], cov: &SymMatrix, n: usize) -> Result<Matrix> {
    let p = mean.len();
    check_dim("sample_gaussian covariance", p, cov.dim())?;
    let l = cholesky(cov)?;
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        fill_standard_normal(rng, &mut z);
        let row = out.row_mut(i);
        for (a, r) in row.iter_mut().enumerate() {
            let lz: f64 = l.row(a)[..=a].iter().zip(&z).map(|(x, y)| x * y).sum();
            *r = mean[a] + lz;
        }
    }
    Ok(out)
}

/// Rows uniform on the unit sphere of `R^r` (normalized standard Gaussians).
pub fn sample_sphere(rng: &mut Rng, r: usize, n: usize) -> Result<Matrix> {
    if r == 0 {
        return Err(Error::Domain("sample_sphere needs r >= 1".into()));
    }
    let mut out = Matrix::zeros(n, r);
    for i in 0..n {
        let row = out.row_mut(i);
        loop {
            fill_standard_normal(rng, row);
            let nrm = linalg::norm2(row);
            if nrm > 0.0 {
                row.iter_mut().for_each(|x| *x /= nrm);
                break;
            }
        }
    }
    Ok(out)
}

fn chi_squared(dof: f64) -> Result<ChiSquared<f64>> {
    ChiSquared::new(dof).map_err(|_| Error::Domain(format!("invalid degrees of freedom {dof}")))
}

/// Draws `(U, xi)` pairs: `U` on the sphere of `R^r`, radius by `xi`.
/// Writes `U` into `u` and returns `xi`.
fn draw_direction_radius(
    rng: &mut Rng,
    xi: &XiSampler,
    chi: Option<&ChiSquared<f64>>,
    idx: usize,
    u: &mut [f64],
) -> Result<f64> {
    // For a standard Gaussian Z, ||Z|| and Z/||Z|| are independent, so one
    // draw yields both the direction and the Gaussian-implied radius.
    let nrm = loop {
        fill_standard_normal(rng, u);
        let nrm = linalg::norm2(u);
        if nrm > 0.0 {
            break nrm;
        }
    };
    u.iter_mut().for_each(|x| *x /= nrm);
    match xi {
        XiSampler::GaussianImplied => Ok(nrm),
        XiSampler::TImplied { dof } => {
            let w = chi.expect("chi-square sampler").sample(rng);
            Ok(nrm / math::sqrt(w / dof))
        }
        XiSampler::Custom(values) => {
            let v = *values.get(idx).ok_or_else(|| {
                Error::Domain(format!("custom xi stream exhausted at draw {idx}"))
            })?;
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Domain(format!("custom xi value {v} is not a nonnegative real")));
            }
            Ok(v)
        }
    }
}

/// Rows `theta + xi_i A U_i`.
pub fn sample_elliptical(rng: &mut Rng, model: &EllipticalModel, n: usize) -> Result<Matrix> {
    let p = model.location.len();
    check_dim("sample_elliptical shape rows", p, model.shape.rows())?;
    let r = model.shape.cols();
    if r == 0 {
        return Err(Error::Domain("elliptical shape needs r >= 1".into()));
    }
    let chi = match &model.xi {
        XiSampler::TImplied { dof } => Some(chi_squared(*dof)?),
        _ => None,
    };
    let mut out = Matrix::zeros(n, p);
    let mut u = vec![0.0; r];
    for i in 0..n {
        let xi = draw_direction_radius(rng, &model.xi, chi.as_ref(), i, &mut u)?;
        let au = model.shape.mat_vec(&u);
        for ((o, t), a) in out.row_mut(i).iter_mut().zip(&model.location).zip(&au) {
            *o = t + xi * a;
        }
    }
    Ok(out)
}

/// Multivariate t with density proportional to
/// `(1 + (x - loc)^T scatter^{-1} (x - loc) / dof)^{-(dof + p)/2}`.
pub fn sample_mvt(
    rng: &mut Rng,
    dof: f64,
    loc: &[f64],
    scatter: &SymMatrix,
    n: usize,
) -> Result<Matrix> {
    if dof.is_nan() || dof <= 0.0 {
        return Err(Error::Domain(format!("t degrees of freedom must be positive, got {dof}")));
    }
    let p = loc.len();
    check_dim("sample_mvt scatter", p, scatter.dim())?;
    let l = cholesky(scatter)?;
    let chi = chi_squared(dof)?;
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        fill_standard_normal(rng, &mut z);
        let w: f64 = chi.sample(rng);
        let s = 1.0 / math::sqrt(w / dof);
        for (a, r) in out.row_mut(i).iter_mut().enumerate() {
            let lz: f64 = l.row(a)[..=a].iter().zip(&z).map(|(x, y)| x * y).sum();
            *r = loc[a] + s * lz;
        }
    }
    Ok(out)
}

/// Samples the mixture; `labels[i]` is `true` when row `i` came from the
/// contaminant. Labels are for diagnostics only.
pub fn sample_contaminated(
    rng: &mut Rng,
    sc: &ContaminationScenario,
    n: usize,
) -> Result<(Matrix, Vec<bool>)> {
    if !(0.0..1.0).contains(&sc.epsilon) {
        return Err(Error::Domain(format!("epsilon {} outside [0, 1)", sc.epsilon)));
    }
    let p = sc.clean.dim();
    check_dim("contaminant dimension", p, sc.contaminant.dim())?;
    let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < sc.epsilon).collect();
    let n_bad = labels.iter().filter(|&&b| b).count();
    let good = sc.clean.sample(rng, n - n_bad)?;
    let bad = sc.contaminant.sample(rng, n_bad)?;
    let mut out = Matrix::zeros(n, p);
    let (mut gi, mut bi) = (0, 0);
    for (i, &is_bad) in labels.iter().enumerate() {
        let src = if is_bad {
            bi += 1;
            bad.row(bi - 1)
        } else {
            gi += 1;
            good.row(gi - 1)
        };
        out.row_mut(i).copy_from_slice(src);
    }
    Ok((out, labels))
}

/// Maps a linear index over `{(i, j): i < j < n}` (row-major order) to the pair.
pub(crate) fn pair_from_index(n: usize, k: usize) -> (usize, usize) {
    // start(i) = i n - i (i + 1) / 2; pick the largest i with start(i) <= k.
    let start = |i: usize| i * n - i * (i + 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * k as f64;
    let mut i = ((2.0 * nf - 1.0 - math::sqrt(disc.max(0.0))) / 2.0) as usize;
    i = i.min(n.saturating_sub(2));
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && start(i + 1) <= k {
        i += 1;
    }
    (i, i + 1 + (k - start(i)))
}

/// Selects distinct pairs `(i, j)`, `i < j`: all of them when there are at
/// most `budget`, otherwise `budget` pairs uniformly without replacement.
pub fn select_pairs(n: usize, rng: &mut Rng, budget: usize) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total <= budget {
        let mut out = Vec::with_capacity(total);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push((i, j));
            }
        }
        out
    } else {
        rand::seq::index::sample(rng, total, budget)
            .into_iter()
            .map(|k| pair_from_index(n, k))
            .collect()
    }
}

/// Rows `(X_i - X_j) / sqrt(2)` over distinct pairs; the result has mean zero
/// and the same covariance as the input whatever the location.
pub fn pair_difference_transform(data: &Matrix, rng: &mut Rng, max_pairs: usize) -> Result<Matrix> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::Domain(format!("pair transform needs n >= 2, got {n}")));
    }
    let pairs = select_pairs(n, rng, max_pairs);
    let p = data.cols();
    let mut out = Matrix::zeros(pairs.len(), p);
    let s = core::f64::consts::FRAC_1_SQRT_2;
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for ((o, a), b) in out.row_mut(r).iter_mut().zip(data.row(i)).zip(data.row(j)) {
            *o = (a - b) * s;
        }
    }
    Ok(out)
}

/// `(Sigma_ar)_jk = rho^|j-k|`.
pub fn ar_matrix(p: usize, rho: f64) -> SymMatrix {
    SymMatrix::from_fn(p, |i, j| math::powf(rho, (j - i) as f64))
}

/// Covariance about the sample mean with divisor `n`.
pub(crate) fn centered_second_moment(data: &Matrix) -> SymMatrix {
    let n = data.rows();
    let p = data.cols();
    if n == 0 {
        return SymMatrix::zeros(p);
    }
    let mean = data.column_means();
    let mut acc = Matrix::zeros(p, p);
    let mut c = vec![0.0; p];
    for r in data.row_iter() {
        for ((ci, x), m) in c.iter_mut().zip(r).zip(&mean) {
            *ci = x - m;
        }
        for a in 0..p {
            for b in a..p {
                acc[(a, b)] += c[a] * c[b];
            }
        }
    }
    SymMatrix::from_fn(p, |a, b| acc[(a, b)] / n as f64)
}

/// `n` i.i.d. radii from `xi` in dimension `r`.
pub fn sample_radii(rng: &mut Rng, xi: &XiSampler, r: usize, n: usize) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::Domain("radius needs r >= 1".into()));
    }
    match xi {
        XiSampler::GaussianImplied => {
            let chi = chi_squared(r as f64)?;
            Ok((0..n).map(|_| math::sqrt(chi.sample(rng))).collect())
        }
        XiSampler::TImplied { dof } => {
            let num = chi_squared(r as f64)?;
            let den = chi_squared(*dof)?;
            Ok((0..n)
                .map(|_| math::sqrt(num.sample(rng) / (den.sample(rng) / dof)))
                .collect())
        }
        XiSampler::Custom(values) => {
            if values.len() < n {
                return Err(Error::Domain(format!(
                    "custom xi stream has {} values, {n} requested",
                    values.len()
                )));
            }
            Ok(values[..n].to_vec())
        }
    }
}

/// First coordinate of a uniform direction on the sphere of `R^r`.
pub fn sample_sphere_coordinate(rng: &mut Rng, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::Domain("sphere needs r >= 1".into()));
    }
    let z = standard_normal(rng);
    if r == 1 {
        return Ok(if z >= 0.0 { 1.0 } else { -1.0 });
    }
    let rest = chi_squared((r - 1) as f64)?.sample(rng);
    let nrm = math::sqrt(z * z + rest);
    Ok(if nrm > 0.0 { z / nrm } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn rng(seed: u64) -> Rng {
        substream(seed, Stream::Data)
    }

    #[test]
    fn gaussian_mean_and_variance() {
        let mut r = rng(1);
        let x = sample_gaussian(&mut r, &[0.0, 0.0], &SymMatrix::identity(2), 4096).unwrap();
        for m in x.column_means() {
            assert!(m.abs() <= 4.0 / 64.0);
        }
        let x = sample_gaussian(&mut r, &[0.0, 0.0], &SymMatrix::from_diag(&[4.0, 1.0]), 4096)
            .unwrap();
        let v = centered_second_moment(&x);
        assert!((3.5..=4.5).contains(&v[(0, 0)]), "{}", v[(0, 0)]);
        let e = sample_gaussian(&mut r, &[0.0], &SymMatrix::identity(1), 0).unwrap();
        assert_eq!(e.rows(), 0);
    }

    #[test]
    fn gaussian_rejects_non_pd() {
        let mut r = rng(1);
        let err = sample_gaussian(&mut r, &[0.0, 0.0], &SymMatrix::from_diag(&[1.0, -1.0]), 3);
        assert!(matches!(err, Err(Error::NotPd { .. })));
    }

    #[test]
    fn sphere_rows() {
        let mut r = rng(2);
        let x = sample_sphere(&mut r, 3, 100).unwrap();
        for row in x.row_iter() {
            assert!((linalg::norm2(row) - 1.0).abs() <= 1e-12);
        }
        let x = sample_sphere(&mut r, 1, 4096).unwrap();
        let pos = x.as_slice().iter().filter(|&&v| v == 1.0).count();
        assert!(x.as_slice().iter().all(|&v| v == 1.0 || v == -1.0));
        assert!(((pos as f64 / 4096.0) - 0.5).abs() <= 0.05);
        let rdim = 4;
        let x = sample_sphere(&mut r, rdim, 8192).unwrap();
        let m = x.column_means();
        assert!(linalg::norm2(&m) <= 4.0 / (8192f64).sqrt() * (rdim as f64).sqrt());
    }

    #[test]
    fn elliptical_unit_radius_on_sphere() {
        let mut r = rng(3);
        let model = EllipticalModel {
            location: vec![0.0; 3],
            shape: Matrix::identity(3),
            xi: XiSampler::Custom(vec![1.0; 50]),
        };
        let x = sample_elliptical(&mut r, &model, 50).unwrap();
        for row in x.row_iter() {
            assert!((linalg::norm2(row) - 1.0).abs() <= 1e-12);
        }
        assert!(sample_elliptical(&mut r, &model, 51).is_err());
        let neg = EllipticalModel {
            xi: XiSampler::Custom(vec![-1.0]),
            ..model
        };
        assert!(matches!(sample_elliptical(&mut r, &neg, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn elliptical_gaussian_implied_variance() {
        let mut r = rng(4);
        let model = EllipticalModel {
            location: vec![0.0; 2],
            shape: Matrix::identity(2),
            xi: XiSampler::GaussianImplied,
        };
        let x = sample_elliptical(&mut r, &model, 8192).unwrap();
        let v = centered_second_moment(&x);
        assert!((v[(0, 0)] - 1.0).abs() < 0.1 && (v[(1, 1)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn contamination_counts_and_dirac() {
        let p = 3;
        let clean = Distribution::Gaussian {
            mean: vec![0.0; p],
            cov: SymMatrix::identity(p),
        };
        let point = vec![5.0; p];
        let sc = ContaminationScenario {
            clean: clean.clone(),
            contaminant: Distribution::Dirac(point.clone()),
            epsilon: 0.2,
        };
        let mut r = rng(5);
        let (x, labels) = sample_contaminated(&mut r, &sc, 10_000).unwrap();
        let k = labels.iter().filter(|&&b| b).count();
        assert!((1800..=2200).contains(&k), "{k}");
        for (row, &bad) in x.row_iter().zip(&labels) {
            if bad {
                assert_eq!(row, point.as_slice());
            }
        }
        let sc0 = ContaminationScenario { epsilon: 0.0, ..sc };
        let (_, labels) = sample_contaminated(&mut r, &sc0, 1000).unwrap();
        assert!(labels.iter().all(|&b| !b));
    }

    #[test]
    fn pair_index_mapping_is_bijective() {
        for n in 2..40 {
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(pair_from_index(n, k), (i, j), "n={n} k={k}");
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn pair_transform_examples() {
        let mut r = rng(6);
        let data = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, -2.0]]).unwrap();
        let t = pair_difference_transform(&data, &mut r, 10).unwrap();
        assert_eq!(t.rows(), 1);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(t.row(0), &[-2.0 * s, 4.0 * s]);

        let data = sample_gaussian(&mut r, &[0.0; 2], &SymMatrix::identity(2), 100).unwrap();
        let pairs = select_pairs(100, &mut r, 10);
        assert_eq!(pairs.len(), 10);
        let mut sorted = pairs.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert!(pairs.iter().all(|&(i, j)| i < j && j < 100));
        assert_eq!(pair_difference_transform(&data, &mut r, 10).unwrap().rows(), 10);
        assert!(pair_difference_transform(&data.select_rows(&[0]), &mut r, 10).is_err());
    }

    #[test]
    fn ar_matrix_exact() {
        let m = ar_matrix(6, 0.5);
        for j in 0..6 {
            for k in 0..6 {
                assert_eq!(m[(j, k)], 0.5f64.powi((j as i32 - k as i32).abs()));
            }
        }
    }
}
