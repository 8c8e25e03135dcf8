//! RBF kernel and kernel ridge regression.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{ModelParams, Solved};
use crate::linalg::{mean, solve_spd, squared_distance, Matrix};
use crate::Result;

#[inline]
pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    libm::exp(-gamma * squared_distance(a, b))
}

/// Symmetric Gram matrix of `x` under the RBF kernel, row-major `n×n`.
pub fn gram(x: &Matrix, gamma: f64) -> Vec<f64> {
    let n = x.rows();
    let mut k = alloc::vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Solves `(K + αI) a = y − ȳ`.
pub(crate) fn kernel_ridge(x: &Matrix, y: &[f64], alpha: f64, gamma: f64) -> Result<Solved> {
    let n = x.rows();
    let offset = mean(y);
    let mut k = gram(x, gamma);
    for i in 0..n {
        k[i * n + i] += alpha;
    }
    let centered: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let coefficients = solve_spd(DMatrix::from_row_slice(n, n, &k), &centered)?;
    Ok(Solved {
        params: ModelParams::Kernel { gamma, coefficients, offset, support: x.clone() },
        converged: true,
        iterations: 1,
    })
}

pub(crate) fn predict(gamma: f64, coefficients: &[f64], offset: f64, support: &Matrix, features: &Matrix) -> Vec<f64> {
    features
        .iter_rows()
        .map(|q| offset + support.iter_rows().zip(coefficients).map(|(s, c)| c * rbf(gamma, s, q)).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::regressors::{fit, predict as model_predict, RegressorKind, RegressorSpec};

    #[test]
    fn rbf_values() {
        assert_eq!(rbf(1.0, &[0.0, 0.0], &[0.0, 0.0]), 1.0);
        assert!((rbf(2.0, &[0.0], &[1.0]) - libm::exp(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn interpolates_training_targets_as_alpha_vanishes() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let y: Vec<f64> = x.iter().map(|v| libm::sin(6.0 * v) * 0.4 + 0.5).collect();
        let d = Dataset::new(Matrix::from_vec(12, 1, x).unwrap(), y.clone()).unwrap();
        let spec = RegressorSpec::new(RegressorKind::KernelRidge).with("alpha", 1e-12).with("gamma", 10.0);
        let m = fit(&spec, &d).unwrap();
        let p = model_predict(&m, &d.features).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gram_is_symmetric_with_unit_diagonal() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]], 2).unwrap();
        let k = gram(&x, 0.7);
        for i in 0..3 {
            assert_eq!(k[i * 3 + i], 1.0);
            for j in 0..3 {
                assert_eq!(k[i * 3 + j], k[j * 3 + i]);
            }
        }
    }
}
