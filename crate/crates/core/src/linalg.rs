//! Dense row-major matrices and the handful of linear solves the regressors need.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A dense, row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch(data.len(), rows * cols));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows. `cols` is needed for the
    /// zero-row case.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty buffer with cols == 0 would panic
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Copies the given rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.cols });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.iter_rows().map(|r| dot(r, v)).collect()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Column means of `x`.
pub fn column_means(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (acc, v) in m.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let n = x.rows().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky factorization.
///
/// A pivot that is at rounding level relative to the largest diagonal entry counts
/// as a failed factorization.
pub fn solve_spd(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let floor = n as f64 * f64::EPSILON * max_diag;
    if (0..n).any(|i| {
        let p = chol.l_dirty()[(i, i)];
        p * p <= floor
    }) {
        return Err(Error::SingularSystem);
    }
    let x = chol.solve(&DVector::from_column_slice(b));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x.as_slice().to_vec())
}

/// Weighted Gram system `Xc^T W Xc + ridge I` and right-hand side `Xc^T W yc`, where
/// `Xc`/`yc` are centered by the weighted means. Returns the solved weights and the
/// intercept, so that `y ≈ x·w + b`.
pub(crate) fn weighted_ridge(x: &Matrix, y: &[f64], weights: Option<&[f64]>, ridge: f64) -> Result<(Vec<f64>, f64)> {
    let n = x.rows();
    let d = x.cols();
    let w_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w_at).sum();
    if wsum <= 0.0 {
        return Err(Error::SingularSystem);
    }
    let mut xm = vec![0.0; d];
    let mut ym = 0.0;
    for i in 0..n {
        let wi = w_at(i);
        for (m, v) in xm.iter_mut().zip(x.row(i)) {
            *m += wi * v;
        }
        ym += wi * y[i];
    }
    xm.iter_mut().for_each(|v| *v /= wsum);
    ym /= wsum;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        let wi = w_at(i);
        for (c, (v, m)) in centered.iter_mut().zip(x.row(i).iter().zip(&xm)) {
            *c = v - m;
        }
        let yc = y[i] - ym;
        for a in 0..d {
            let ca = wi * centered[a];
            rhs[a] += ca * yc;
            for b in a..d {
                gram[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += ridge;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let w = solve_spd(gram, &rhs)?;
    let b = ym - dot(&xm, &w);
    Ok((w, b))
}
