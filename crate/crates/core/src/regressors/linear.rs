//! Ridge by direct solve, Lasso and Elastic Net by cyclic coordinate descent.

use alloc::vec;
use alloc::vec::Vec;

use super::{ModelParams, Solved};
use crate::linalg::{column_means, mean, weighted_ridge, Matrix};
use crate::Result;

/// Solves `(XcᵀXc + αI) w = Xcᵀyc` on centered data.
pub(crate) fn ridge(x: &Matrix, y: &[f64], alpha: f64) -> Result<Solved> {
    let (weights, intercept) = weighted_ridge(x, y, None, alpha)?;
    Ok(Solved { params: ModelParams::Linear { weights, intercept }, converged: true, iterations: 1 })
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Coordinate descent outcome on centered data.
#[derive(Debug, Clone)]
pub struct CdSolution {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Minimizes `‖y − Xw − b‖²/(2n) + α·ρ‖w‖₁ + α(1−ρ)/2·‖w‖²` by cyclic coordinate
/// descent. Stops when the largest coefficient change in a sweep is below `tol`.
pub fn coordinate_descent(x: &Matrix, y: &[f64], alpha: f64, l1_ratio: f64, tol: f64, max_sweeps: usize) -> CdSolution {
    let n = x.rows();
    let d = x.cols();
    let nf = n as f64;
    let xm = column_means(x);
    let ym = mean(y);

    // column-major centered copy; each coordinate update walks one column
    let mut cols = vec![0.0; n * d];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            cols[j * n + i] = v - xm[j];
        }
    }
    let col_sq: Vec<f64> = (0..d).map(|j| cols[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);

    let mut w = vec![0.0; d];
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..d {
            let col = &cols[j * n..(j + 1) * n];
            let old = w[j];
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + col_sq[j] * old;
            let new = soft_threshold(rho, l1) / (col_sq[j] + l2);
            let delta = new - old;
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * delta;
                }
                w[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }
    let intercept = ym - xm.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    CdSolution { weights: w, intercept, sweeps, converged }
}

pub(crate) fn elastic_net(x: &Matrix, y: &[f64], alpha: f64, l1_ratio: f64, tol: f64, max_sweeps: usize) -> Solved {
    let s = coordinate_descent(x, y, alpha, l1_ratio, tol, max_sweeps);
    Solved {
        params: ModelParams::Linear { weights: s.weights, intercept: s.intercept },
        converged: s.converged,
        iterations: s.sweeps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::RngExt;

    fn random_problem(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::from_vec(n, d, x).unwrap();
        let w: Vec<f64> = (0..d).map(|j| if j % 3 == 0 { 0.0 } else { rng.random::<f64>() - 0.5 }).collect();
        let y = x.iter_rows().map(|r| crate::linalg::dot(r, &w) + 0.05 * (rng.random::<f64>() - 0.5)).collect();
        (x, y)
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
    }

    #[test]
    fn large_alpha_zeroes_every_weight() {
        let (x, y) = random_problem(30, 4, 1);
        let s = coordinate_descent(&x, &y, 10.0, 1.0, 1e-7, 1000);
        assert!(s.weights.iter().all(|&w| w == 0.0));
        assert!((s.intercept - mean(&y)).abs() < 1e-12);
    }

    /// Subgradient optimality at the returned point, on centered data.
    #[test]
    fn kkt_conditions_hold() {
        for (seed, alpha, rho) in [(3, 1e-3, 1.0), (4, 1e-2, 0.5), (5, 5e-3, 0.25), (6, 2e-2, 0.75)] {
            let (x, y) = random_problem(80, 6, seed);
            let s = coordinate_descent(&x, &y, alpha, rho, 1e-10, 100_000);
            assert!(s.converged);
            let n = x.rows() as f64;
            for j in 0..x.cols() {
                let xj = x.column(j);
                let grad: f64 = (0..x.rows())
                    .map(|i| {
                        let r = y[i] - crate::linalg::dot(x.row(i), &s.weights) - s.intercept;
                        -xj[i] * r
                    })
                    .sum::<f64>()
                    / n
                    + alpha * (1.0 - rho) * s.weights[j];
                let l1 = alpha * rho;
                if s.weights[j] == 0.0 {
                    assert!(grad.abs() <= l1 + 1e-6, "zero coef {j}: |{grad}| > {l1}");
                } else {
                    assert!((grad + l1 * s.weights[j].signum()).abs() <= 1e-6, "coef {j}");
                }
            }
        }
    }
}
