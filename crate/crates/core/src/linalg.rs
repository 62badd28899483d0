//! Dense linear algebra used by the estimators.
//!
//! Everything here works on small row-major matrices (a few dozen columns at
//! most): cyclic Jacobi for the symmetric eigenproblem, Cholesky for SPD
//! solves, and the `sqrt(lambda_max / lambda_min)` condition number.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const PIVOT_TOL: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { rows: rows.len(), cols: ncols, data })
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

    /// A single column as a matrix.
    pub fn column_vector(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply transpose of {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        Ok(out)
    }

    /// `Xᵀ diag(w) X`, the weighted cross-product.
    pub fn weighted_crossprod(&self, weights: &[f64]) -> Result<SymmetricMatrix> {
        if weights.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                self.rows
            )));
        }
        let q = self.cols;
        let mut out = Matrix::zeros(q, q);
        for (i, &w) in weights.iter().enumerate() {
            let row = self.row(i);
            for a in 0..q {
                let wa = w * row[a];
                for b in a..q {
                    out.data[a * q + b] += wa * row[b];
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                out.data[a * q + b] = out.data[b * q + a];
            }
        }
        Ok(SymmetricMatrix(out))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Largest absolute difference between mirrored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// A square matrix known to be symmetric and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    /// Validates symmetry (relative to the largest entry) and finiteness.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("symmetric matrix".into()));
        }
        let scale = m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
        let asymmetry = m.max_asymmetry();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self(m))
    }

    /// Averages `m` with its transpose.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let out = Matrix::from_fn(m.rows, m.cols, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Self::new(out)
    }

    pub fn identity(q: usize) -> Self {
        Self(Matrix::identity(q))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(Matrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.rows {
            m[(i, i)] += shift;
        }
        Self(m)
    }
}

impl Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues sorted descending; column `k` of `eigenvectors` pairs with
/// `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let q = self.eigenvalues.len();
        let v = &self.eigenvectors;
        Matrix::from_fn(q, q, |i, j| {
            (0..q).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum()
        })
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm is below `1e-12` times
/// the diagonal norm. Each eigenvector is signed so its largest-magnitude
/// component is non-negative.
pub fn symmetric_eigen(s: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let q = s.dim();
    if q == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut a = s.matrix().clone();
    let mut v = Matrix::identity(q);

    let off_norm = |a: &Matrix| {
        let mut acc = 0.0;
        for i in 0..q {
            for j in 0..q {
                if i != j {
                    acc += a[(i, j)] * a[(i, j)];
                }
            }
        }
        acc.sqrt()
    };
    let diag_norm = |a: &Matrix| a.diagonal().iter().map(|d| d * d).sum::<f64>().sqrt();

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        let off = off_norm(&a);
        if off <= JACOBI_TOL * diag_norm(&a) || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..q {
            for r in (p + 1)..q {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let arr = a[(r, r)];
                let theta = (arr - app) / (2.0 * apr);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    a[(p, r)] = 0.0;
                    a[(r, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..q {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - sn * akr;
                    a[(k, r)] = sn * akp + c * akr;
                }
                for k in 0..q {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - sn * ark;
                    a[(r, k)] = sn * apk + c * ark;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;

                for k in 0..q {
                    let vkp = v[(k, p)];
                    let vkr = v[(k, r)];
                    v[(k, p)] = c * vkp - sn * vkr;
                    v[(k, r)] = sn * vkp + c * vkr;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }

    let raw = a.diagonal();
    let mut order: Vec<usize> = (0..q).collect();
    // stable: ties keep Jacobi output order
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));

    let eigenvalues = order.iter().map(|&k| raw[k]).collect();
    let mut eigenvectors = Matrix::zeros(q, q);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let lead = col
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in col.into_iter().enumerate() {
            eigenvectors[(i, dst)] = sign * x;
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    /// Fails with [`Error::NotPositiveDefinite`] when a pivot drops below
    /// `1e-12` relative to the largest diagonal entry.
    pub fn factor(a: &SymmetricMatrix) -> Result<Self> {
        let q = a.dim();
        let scale = a.matrix().diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let floor = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
        let mut l = Matrix::zeros(q, q);
        for j in 0..q {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::NotPositiveDefinite { column: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..q {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let q = self.lower.rows;
        if b.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a {q}x{q} system",
                b.len()
            )));
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..q {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..q).rev() {
            let mut s = y[i];
            for k in (i + 1)..q {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows != self.lower.rows {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows for a {}x{} system",
                b.rows, self.lower.rows, self.lower.rows
            )));
        }
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<SymmetricMatrix> {
        let inv = self.solve(&Matrix::identity(self.lower.rows))?;
        SymmetricMatrix::symmetrize(&inv)
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymmetricMatrix, b: &Matrix) -> Result<Matrix> {
    Cholesky::factor(a)?.solve(b)
}

pub fn inverse_spd(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Cholesky::factor(a)?.inverse()
}

/// `sqrt(lambda_max / lambda_min)`.
pub fn condition_number(s: &SymmetricMatrix) -> Result<f64> {
    condition_number_from_eigenvalues(&symmetric_eigen(s)?.eigenvalues)
}

pub fn condition_number_from_eigenvalues(eigenvalues: &[f64]) -> Result<f64> {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if eigenvalues.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    if !(min > 0.0) {
        return Err(Error::NonPositiveEigenvalue { value: min });
    }
    Ok((max / min).sqrt())
}

/// Pearson correlation matrix of the columns of `x`.
pub fn correlation_matrix(x: &Matrix) -> Result<SymmetricMatrix> {
    let (n, q) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two rows".into()));
    }
    let means: Vec<f64> = (0..q).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let centered = Matrix::from_fn(n, q, |i, j| x[(i, j)] - means[j]);
    let cov = centered.weighted_crossprod(&vec![1.0; n])?.into_matrix();
    let sd: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    if let Some(j) = sd.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(format!("column {j} has zero variance")));
    }
    let corr = Matrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) });
    SymmetricMatrix::symmetrize(&corr)
}
