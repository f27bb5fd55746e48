//! Dense row-major matrices and the handful of kernels the simulator needs.
//!
//! Rows of an `N x p` matrix are agents; columns are coordinates of the
//! decision vector. Sizes here are desk scale (tens of agents, tens to
//! hundreds of coordinates), so nothing is blocked or vectorized.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// A matrix whose rows are all copies of `row`.
    pub fn repeat_row(rows: usize, row: &[f64]) -> Self {
        let mut data = Vec::with_capacity(rows * row.len());
        for _ in 0..rows {
            data.extend_from_slice(row);
        }
        Self { rows, cols: row.len(), data }
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-column matrix still has rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension { expected: self.cols, got: rhs.rows });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, rhs.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// Column means, i.e. the row of `(1/N) e^T self`.
    pub fn row_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.row_iter() {
            axpy(1.0, r, &mut mean);
        }
        let n = self.rows as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        mean
    }

    /// `self - (1/N) e e^T self`: every row minus the average row.
    pub fn deviation_from_mean(&self) -> Matrix {
        let mean = self.row_mean();
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, m) in out.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.frobenius_sq())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &Matrix) -> Result<()> {
        self.check_same_shape(other)?;
        axpy(a, &other.data, &mut self.data);
        Ok(())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    pub fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::Dimension { expected: self.rows, got: other.rows });
        }
        if self.cols != other.cols {
            return Err(Error::Dimension { expected: self.cols, got: other.cols });
        }
        Ok(())
    }

    /// Largest entry of `|self - self^T|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// `y += a * x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Only the upper triangle is trusted to match the lower one; callers check
/// symmetry themselves. Converges quadratically, so the sweep bound is never
/// reached for well-formed input.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension { expected: n, got: a.cols() });
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && n > 1 {
        return Err(Error::EigenNoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Spectral norm of a symmetric matrix: its largest eigenvalue magnitude.
pub fn symmetric_norm(a: &Matrix) -> Result<f64> {
    let eig = symmetric_eigen(a)?;
    Ok(eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}
