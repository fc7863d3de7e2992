//! Dense linear algebra kernels: row-major matrices, symmetric matrices,
//! cyclic Jacobi eigendecomposition, power-iteration operator norm,
//! Cholesky factorization and the symmetric square root.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const POWER_MAX_ITER: usize = 1000;
const POWER_REL_TOL: f64 = 1e-12;
const POWER_RESTART_SEED: u64 = 0x005e_ed0f_9043;

/// Relative psd tolerance: eigenvalues down to `-PSD_REL_TOL * ||m||_op` count as zero.
pub const PSD_REL_TOL: f64 = 1e-9;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "MatrixRepr"))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: format!("Matrix::from_vec({rows}x{cols})"),
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "Matrix::from_rows".into(),
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a 0-column matrix still has rows.
        let cols = self.cols.max(1);
        let n = if self.cols == 0 { 0 } else { self.rows };
        self.data.chunks_exact(cols).take(n)
    }

    /// Copies the selected rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in o_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension");
        Matrix::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul inner dimension");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec dimension");
        self.row_iter().map(|r| dot(r, v)).collect()
    }

    /// `A A^T`, symmetric by construction.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.rows, |i, j| dot(self.row(i), self.row(j)))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        if self.rows > 0 {
            for m in &mut mean {
                *m /= self.rows as f64;
            }
        }
        mean
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

/// Square symmetric matrix. Every mutation writes both triangles, so
/// `m[(i, j)] == m[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Matrix", into = "Matrix"))]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        Self(Matrix::from_diag(d))
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    /// `(m + m^T) / 2`.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix::symmetrize (square)".into(),
                expected: m.rows(),
                found: m.cols(),
            });
        }
        Ok(Self::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self(self.0.sub(&other.0))
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        self.0.mat_vec(v)
    }

    /// Quadratic form `v^T m v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mat_vec(v))
    }

    /// `D m D` for diagonal `D = diag(d)`.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        Self::from_fn(self.dim(), |i, j| d[i] * self.0[(i, j)] * d[j])
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.0)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl TryFrom<Matrix> for SymMatrix {
    type Error = Error;

    /// Accepts only exactly symmetric input.
    fn try_from(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix (square)".into(),
                expected: m.rows(),
                found: m.cols(),
            });
        }
        for i in 0..m.rows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::Domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }
}

impl From<SymMatrix> for Matrix {
    fn from(m: SymMatrix) -> Matrix {
        m.0
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthogonal matrix whose column `k` pairs with `values[k]`.
    pub vectors: Matrix,
}

impl SymEigen {
    /// `V diag(f(lambda)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    if !m.as_matrix().is_finite() {
        return Err(Error::Domain(format!("sym_eig: {n}x{n} matrix has non-finite entries")));
    }
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let frob = a.frobenius_norm();
    let target = 1e-15 * frob;

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        math::sqrt(2.0 * s)
    };

    let mut converged = frob == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_norm(&a);
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off = off_norm(&a);
        if off > 1e-12 * frob {
            return Err(Error::NotConverged {
                what: format!("sym_eig on {n}x{n} matrix (||m||_F = {frob:e})"),
                iterations: JACOBI_MAX_SWEEPS,
                residual: off,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymEigen { values, vectors })
}

/// Largest singular value by power iteration on `m^T m`.
///
/// Runs from the normalized all-ones vector and from a fixed-seed random
/// vector and keeps the larger estimate, so an unlucky deterministic start
/// (orthogonal to the top singular direction) cannot under-report.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.max_abs() == 0.0 || m.cols() == 0 {
        return 0.0;
    }
    let mtm = m.t_matmul(m);
    let k = mtm.rows();
    let ones = vec![1.0 / math::sqrt(k as f64); k];
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_RESTART_SEED);
    let random: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
    let a = power_rayleigh(&mtm, ones);
    let b = power_rayleigh(&mtm, random);
    math::sqrt(a.max(b).max(0.0))
}

fn power_rayleigh(b: &Matrix, mut v: Vec<f64>) -> f64 {
    let nv = norm2(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda_old = f64::NAN;
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = b.mat_vec(&v);
        lambda = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (lambda - lambda_old).abs() < POWER_REL_TOL * lambda.abs() {
            break;
        }
        lambda_old = lambda;
    }
    let w = b.mat_vec(&v);
    dot(&v, &w).max(lambda)
}

/// Symmetric square root of a psd matrix. Eigenvalues in
/// `[-PSD_REL_TOL * ||m||_op, 0)` are clamped to zero.
pub fn sym_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let scale = eig.values.iter().fold(0.0f64, |s, l| s.max(l.abs()));
    let tol = PSD_REL_TOL * scale;
    if let Some(&min) = eig.values.last() {
        if min < -tol {
            return Err(Error::NotPsd { eigenvalue: min, tol });
        }
    }
    Ok(eig.reconstruct_with(|l| math::sqrt(l.max(0.0))))
}

/// Replaces every eigenvalue below `floor` by `floor`.
pub fn clamp_eigenvalues(m: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    Ok(eig.reconstruct_with(|l| l.max(floor)))
}

/// Lower-triangular `L` with `L L^T = m`.
pub fn cholesky(m: &SymMatrix) -> Result<Matrix> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NotPd { index: j, pivot: d });
        }
        let ljj = math::sqrt(d);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a positive definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(m)?;
    let n = m.dim();
    // Columns of L^{-1}, then m^{-1} = L^{-T} L^{-1}.
    let mut linv = Matrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(SymMatrix::from_fn(n, |i, j| {
        (i.max(j)..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn eig_diagonal() {
        let e = sym_eig(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)].abs(), 1.0);
        assert_eq!(e.vectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&SymMatrix::identity(6)).unwrap();
        assert!(e.values.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn eig_reconstructs_and_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 12, 30] {
            let b = random_matrix(&mut rng, n, n);
            let m = SymMatrix::symmetrize(&b.scale(3.0)).unwrap();
            let e = sym_eig(&m).unwrap();
            let rec = e.reconstruct_with(|l| l);
            let err = rec.as_matrix().sub(m.as_matrix()).max_abs();
            assert!(err <= 1e-8 * (1.0 + m.as_matrix().max_abs()), "n={n} err={err}");
            let vtv = e.vectors.t_matmul(&e.vectors);
            assert!(vtv.sub(&Matrix::identity(n)).max_abs() <= 1e-8);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_rejects_nan() {
        let mut m = SymMatrix::identity(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(sym_eig(&m), Err(Error::Domain(_))));
    }

    #[test]
    fn opnorm_examples() {
        assert_eq!(operator_norm(&Matrix::from_diag(&[3.0, 1.0])), 3.0);
        assert_eq!(operator_norm(&Matrix::zeros(3, 4)), 0.0);
        // ones vector lies in the null space of m^T m here
        let m = Matrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
        assert!((operator_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn opnorm_rectangular_matches_eig() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 4, 6);
        let mtm = SymMatrix::symmetrize(&m.t_matmul(&m)).unwrap();
        let top = sym_eig(&mtm).unwrap().values[0];
        let on = operator_norm(&m);
        assert!((on - top.sqrt()).abs() <= 1e-6 * top.sqrt());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(sym_sqrt(&SymMatrix::identity(3)).unwrap(), SymMatrix::identity(3));
        let r = sym_sqrt(&SymMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
        assert_eq!(r[(0, 1)], 0.0);
    }

    #[test]
    fn sqrt_of_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_matrix(&mut rng, 5, 3);
        let m = b.gram();
        let r = sym_sqrt(&m).unwrap();
        let sq = r.as_matrix().matmul(r.as_matrix());
        assert!(sq.sub(m.as_matrix()).max_abs() <= 1e-7);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let err = sym_sqrt(&SymMatrix::from_diag(&[1.0, -0.5])).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        // tiny negative rounding is clamped
        let ok = sym_sqrt(&SymMatrix::from_diag(&[1.0, -1e-12])).unwrap();
        assert_eq!(ok[(1, 1)], 0.0);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&SymMatrix::identity(3)).unwrap(), Matrix::identity(3));
        let m = SymMatrix::from_fn(2, |i, j| [[4.0, 2.0], [2.0, 5.0]][i][j]);
        let l = cholesky(&m).unwrap();
        assert_eq!(l, Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]]).unwrap());
        let bad = SymMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(cholesky(&bad), Err(Error::NotPd { index: 1, .. })));
    }

    #[test]
    fn cholesky_random_pd_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_matrix(&mut rng, 6, 6);
        let m = b.gram().add(&SymMatrix::identity(6));
        let l = cholesky(&m).unwrap();
        assert!(l.matmul_t(&l).sub(m.as_matrix()).max_abs() <= 1e-8);
        let inv = spd_inverse(&m).unwrap();
        let prod = inv.as_matrix().matmul(m.as_matrix());
        assert!(prod.sub(&Matrix::identity(6)).max_abs() <= 1e-10);
    }

    #[test]
    fn symmetric_storage_is_exact() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.5, 3.0]]).unwrap();
        assert!(SymMatrix::try_from(m.clone()).is_err());
        let s = SymMatrix::symmetrize(&m).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }
}
