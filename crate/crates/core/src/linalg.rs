//! Dense real linear algebra for the small matrices that appear in boundary
//! control problems (dimensions of a handful up to a few dozen).
//!
//! Three value types are provided: a general row-major [`Matrix`], an exactly
//! symmetric [`SymMatrix`] and a [`DiagMatrix`]. All of them are immutable
//! values; every operation returns a new matrix. Shape mismatches between
//! operands of arithmetic operators are programming errors and panic, while
//! the numerical routines ([`sym_eig`], [`solve_linear`], ...) report failures
//! through [`LinalgError`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::math;

/// Relative tolerance used for singularity decisions, measured against the
/// Frobenius norm of the input.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Entry count does not match the requested shape, or a zero dimension.
    Shape { rows: usize, cols: usize, len: usize },
    /// Operands have incompatible dimensions.
    DimensionMismatch { expected: usize, found: usize },
    /// A NaN or infinite entry was supplied.
    NonFinite,
    /// Input claimed to be symmetric is not.
    NotSymmetric { row: usize, col: usize },
    /// Matrix is singular to working precision.
    Singular { condition_estimate: f64 },
    /// The Jacobi eigensolver hit its sweep cap.
    NoConvergence { sweeps: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::Shape { rows, cols, len } => {
                write!(f, "cannot build a {rows}x{cols} matrix from {len} entries")
            }
            LinalgError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            LinalgError::NonFinite => write!(f, "matrix has a non-finite entry"),
            LinalgError::NotSymmetric { row, col } => {
                write!(f, "matrix is not symmetric at ({row}, {col})")
            }
            LinalgError::Singular { condition_estimate } => {
                write!(f, "matrix is singular (condition estimate {condition_estimate:e})")
            }
            LinalgError::NoConvergence { sweeps } => {
                write!(f, "eigensolver did not converge after {sweeps} sweeps")
            }
        }
    }
}

impl core::error::Error for LinalgError {}

fn all_finite(data: &[f64]) -> bool {
    data.iter().all(|v| v.is_finite())
}

/// General dense matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::Shape { rows, cols, len: data.len() });
        }
        if !all_finite(&data) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(LinalgError::Shape { rows: nrows, cols: ncols, len: row.len() });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(nrows, ncols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Matrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * diag(d)`, i.e. column `j` scaled by `d[j]`.
    pub fn mul_diag(&self, d: &DiagMatrix) -> Matrix {
        assert_eq!(d.dim(), self.cols, "matrix-diagonal dimension mismatch");
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * d.get(j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, math::abs(*v)))
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    /// `(A + Aᵀ)/2` of a square matrix.
    pub fn symmetrize(&self) -> SymMatrix {
        SymMatrix::from_matrix(self)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "matrix sum dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "matrix difference dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Symmetric matrix with full storage; `get(i, j) == get(j, i)` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Accepts a full row-major matrix that must already be exactly symmetric.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(LinalgError::Shape { rows: dim, cols: dim, len: data.len() });
        }
        if !all_finite(&data) {
            return Err(LinalgError::NonFinite);
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    /// Symmetric part `(A + Aᵀ)/2` of a square matrix.
    pub fn from_matrix(a: &Matrix) -> SymMatrix {
        assert!(a.is_square(), "symmetric part of a non-square matrix");
        SymMatrix::from_upper_fn(a.rows(), |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
    }

    /// Builds a symmetric matrix from a function evaluated on the upper triangle.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> SymMatrix {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        SymMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> SymMatrix {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> SymMatrix {
        SymMatrix::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> SymMatrix {
        SymMatrix::from_upper_fn(dim, |i, j| if i == j { s } else { 0.0 })
    }

    /// `v vᵀ`
    pub fn outer(v: &[f64]) -> SymMatrix {
        SymMatrix::from_upper_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.data.clone() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.to_matrix().to_rows()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s·other`
    pub fn add_scaled(&self, other: &SymMatrix, s: f64) -> SymMatrix {
        assert_eq!(self.dim, other.dim, "symmetric sum dimension mismatch");
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "quadratic form dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            acc += x[i] * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.add_scaled(rhs, -1.0)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;

    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// Diagonal matrix stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagMatrix {
    diag: Vec<f64>,
}

impl DiagMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self, LinalgError> {
        if diag.is_empty() {
            return Err(LinalgError::Shape { rows: 0, cols: 0, len: 0 });
        }
        if !all_finite(&diag) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DiagMatrix { diag })
    }

    pub fn identity(dim: usize) -> DiagMatrix {
        DiagMatrix { diag: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn entries(&self) -> &[f64] {
        &self.diag
    }

    pub fn min(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.diag.iter().all(|&d| d > 0.0)
    }

    pub fn scale(&self, s: f64) -> DiagMatrix {
        DiagMatrix { diag: self.diag.iter().map(|v| v * s).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "diagonal-vector dimension mismatch");
        self.diag.iter().zip(x).map(|(d, v)| d * v).collect()
    }

    /// `diag(d) * m`, i.e. row `i` scaled by `d[i]`.
    pub fn mul_matrix(&self, m: &Matrix) -> Matrix {
        assert_eq!(self.dim(), m.rows(), "diagonal-matrix dimension mismatch");
        Matrix::from_fn(m.rows(), m.cols(), |i, j| self.diag[i] * m.get(i, j))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.diag)
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix::from_upper_fn(self.dim(), |i, j| if i == j { self.diag[i] } else { 0.0 })
    }
}

/// Eigen-decomposition of a symmetric matrix: `A = V diag(values) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, ordered like `values`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eig(a: &SymMatrix) -> Result<SymEigen, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.dim();
    let mut m = a.data.clone();
    let mut v = Matrix::identity(n).data;
    let norm = a.frobenius_norm();

    let mut converged = norm == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += m[p * n + q] * m[p * n + q];
                }
            }
        }
        converged = math::sqrt(off) <= f64::EPSILON * norm;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEigen { values, vectors })
}

pub fn max_eig(a: &SymMatrix) -> Result<f64, LinalgError> {
    let eig = sym_eig(a)?;
    Ok(eig.values[eig.values.len() - 1])
}

pub fn min_eig(a: &SymMatrix) -> Result<f64, LinalgError> {
    Ok(sym_eig(a)?.values[0])
}

/// Largest singular value, `sqrt(λ_max(AᵀA))`.
pub fn spectral_norm(a: &Matrix) -> Result<f64, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let gram = SymMatrix::from_matrix(&(&a.transpose() * a));
    Ok(math::sqrt(max_eig(&gram)?.max(0.0)))
}

/// Solves `A x = b` by LU factorisation with partial pivoting followed by one
/// step of iterative refinement.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let n = a.rows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: b.len() });
    }
    if !a.is_finite() || !all_finite(b) {
        return Err(LinalgError::NonFinite);
    }
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    Ok(x)
}

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Matrix) -> Result<Lu, LinalgError> {
        let n = a.rows();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = DEFAULT_REL_TOL * a.frobenius_norm();
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if math::abs(lu[i * n + k]) > math::abs(lu[p * n + k]) {
                    p = i;
                }
            }
            let pivot = math::abs(lu[p * n + k]);
            max_pivot = max_pivot.max(pivot);
            min_pivot = min_pivot.min(pivot);
            if pivot <= threshold {
                let condition_estimate =
                    if min_pivot > 0.0 { max_pivot / min_pivot } else { f64::INFINITY };
                return Err(LinalgError::Singular { condition_estimate });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / lu[k * n + k];
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i * n + j] * y[j];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }
}

/// Entrywise reciprocal of a diagonal matrix.
pub fn invert_diag(d: &DiagMatrix) -> Result<DiagMatrix, LinalgError> {
    let max = d.diag.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    let min = d.diag.iter().fold(f64::INFINITY, |m, v| m.min(math::abs(*v)));
    if min == 0.0 || min <= DEFAULT_REL_TOL * max {
        let condition_estimate = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(LinalgError::Singular { condition_estimate });
    }
    Ok(DiagMatrix { diag: d.diag.iter().map(|v| 1.0 / v).collect() })
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Returns `None` when `a` is not (numerically) positive definite.
    pub fn factor(a: &SymMatrix) -> Option<Cholesky> {
        Cholesky::factor_slice(a.dim(), a.as_slice())
    }

    pub(crate) fn factor_slice(n: usize, a: &[f64]) -> Option<Cholesky> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = math::sqrt(d);
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// `log det A`
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| math::ln(self.l[i * self.n + i])).sum::<f64>()
    }

    /// Explicit inverse `A⁻¹`.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        SymMatrix::from_upper_fn(n, |i, j| 0.5 * (data[i * n + j] + data[j * n + i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let eig = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let a = DiagMatrix::new(vec![3.0, -5.0]).unwrap().to_sym();
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.values, vec![-5.0, 3.0]);
    }

    #[test]
    fn zero_matrix_extremes() {
        let z = SymMatrix::zeros(4);
        assert_eq!(max_eig(&z).unwrap(), 0.0);
        assert_eq!(min_eig(&z).unwrap(), 0.0);
    }

    #[test]
    fn rank_one_max_eig_is_squared_norm() {
        let v = [1.0, -2.0, 0.5];
        let a = SymMatrix::outer(&v);
        let expected: f64 = v.iter().map(|x| x * x).sum();
        assert!((max_eig(&a).unwrap() - expected).abs() < 1e-12);
        assert!(min_eig(&a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_simple_cases() {
        assert!((spectral_norm(&Matrix::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let d = Matrix::from_diag(&[3.0, -5.0]);
        assert!((spectral_norm(&d).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let b = [1.5, -2.0, 7.25];
        let x = solve_linear(&Matrix::identity(3), &b).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn singular_system_reports_condition() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match solve_linear(&a, &[1.0, 1.0]) {
            Err(LinalgError::Singular { condition_estimate }) => assert!(condition_estimate > 1e10),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn invert_diag_reciprocals() {
        let d = DiagMatrix::new(vec![12.5, 82.0]).unwrap();
        let inv = invert_diag(&d).unwrap();
        assert_eq!(inv.get(0), 0.08);
        assert_eq!(inv.get(1), 1.0 / 82.0);
        assert!(matches!(
            invert_diag(&DiagMatrix::new(vec![1.0, 0.0]).unwrap()),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn symmetric_constructor_rejects_asymmetry() {
        let err = SymMatrix::new(2, vec![1.0, 2.0, 2.5, 1.0]).unwrap_err();
        assert_eq!(err, LinalgError::NotSymmetric { row: 0, col: 1 });
        assert!(Matrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(Matrix::new(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(Cholesky::factor(&a).is_none());
        let b = SymMatrix::new(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let c = Cholesky::factor(&b).unwrap();
        assert!((c.log_det() - 8.0f64.ln()).abs() < 1e-14);
        let inv = c.inverse();
        let prod = &b.to_matrix() * &inv.to_matrix();
        assert!((&prod - &Matrix::identity(2)).max_abs() < 1e-14);
    }
}
