//! ε-insensitive support vector regression with an RBF kernel, solved on the dual
//! by sequential minimal optimization (pairwise updates, second-order working set
//! selection).
//!
//! The dual is written over `2n` variables `αₜ ∈ [0, C]`: the first `n` carry sign
//! `+1` and linear term `ε − yᵢ`, the last `n` carry sign `−1` and `ε + yᵢ`. The
//! regression coefficient of sample `i` is `αᵢ − αᵢ₊ₙ`.

use alloc::vec;
use alloc::vec::Vec;

use super::kernel::gram;
use super::{ModelParams, Solved};
use crate::linalg::Matrix;
use crate::Result;

/// KKT violation tolerance.
pub const SMO_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SvrDual {
    /// All `2n` dual variables.
    pub alpha: Vec<f64>,
    /// `αᵢ − αᵢ₊ₙ`, one per training sample.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Dual objective (maximization form), recorded every `n` updates and at exit.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn iteration_budget(n: usize) -> usize {
    (100 * n).max(100_000)
}

/// Runs SMO on a precomputed row-major `n×n` kernel matrix.
pub fn solve_dual(k: &[f64], y: &[f64], c: f64, tube: f64, tol: f64, max_iter: usize) -> SvrDual {
    let n = y.len();
    let m = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let src = |t: usize| if t < n { t } else { t - n };
    let p: Vec<f64> = (0..m).map(|t| if t < n { tube - y[t] } else { tube + y[t - n] }).collect();
    let qd: Vec<f64> = (0..m).map(|t| k[src(t) * n + src(t)]).collect();
    let q_row = |i: usize, out: &mut [f64]| {
        let si = sign(i);
        let row = &k[src(i) * n..(src(i) + 1) * n];
        for (t, o) in out.iter_mut().enumerate() {
            *o = si * sign(t) * row[src(t)];
        }
    };

    let mut alpha = vec![0.0; m];
    let mut grad = p.clone();
    let mut qi = vec![0.0; m];
    let mut qj = vec![0.0; m];
    let dual = |alpha: &[f64], grad: &[f64]| {
        -0.5 * alpha.iter().zip(grad.iter().zip(&p)).map(|(a, (g, pp))| a * (g + pp)).sum::<f64>()
    };
    let mut trace = vec![dual(&alpha, &grad)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // working set: i maximizes -y G over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if sign(t) > 0.0 {
                if alpha[t] < c && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        q_row(i, &mut qi);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if sign(t) > 0.0 {
                if alpha[t] > 0.0 {
                    let diff = gmax + grad[t];
                    gmax2 = gmax2.max(grad[t]);
                    if diff > 0.0 {
                        let mut quad = qd[i] + qd[t] - 2.0 * sign(i) * qi[t];
                        if quad <= 0.0 {
                            quad = TAU;
                        }
                        let obj = -(diff * diff) / quad;
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            } else if alpha[t] < c {
                let diff = gmax - grad[t];
                gmax2 = gmax2.max(-grad[t]);
                if diff > 0.0 {
                    let mut quad = qd[i] + qd[t] + 2.0 * sign(i) * qi[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        q_row(j, &mut qj);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if sign(i) != sign(j) {
            let mut quad = qd[i] + qd[j] + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
        if iterations % n.max(1) == 0 {
            trace.push(dual(&alpha, &grad));
        }
    }
    trace.push(dual(&alpha, &grad));

    // offset from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut nr_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..m {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 { sum_free / nr_free as f64 } else { 0.5 * (ub + lb) };
    let coefficients = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    SvrDual { alpha, coefficients, bias: -rho, objective_trace: trace, iterations, converged }
}

pub(crate) fn fit(x: &Matrix, y: &[f64], c: f64, tube: f64, gamma: f64) -> Result<Solved> {
    let k = gram(x, gamma);
    let sol = solve_dual(&k, y, c, tube, SMO_TOL, iteration_budget(y.len()));
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.coefficients[i] != 0.0).collect();
    Ok(Solved {
        params: ModelParams::Kernel {
            gamma,
            coefficients: keep.iter().map(|&i| sol.coefficients[i]).collect(),
            offset: sol.bias,
            support: x.select_rows(&keep),
        },
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::RngExt;

    fn problem(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::from_vec(n, 2, x).unwrap();
        let y = x
            .iter_rows()
            .map(|r| 0.5 + 0.3 * libm::sin(4.0 * r[0]) * r[1] + 0.02 * (rng.random::<f64>() - 0.5))
            .collect();
        (x, y)
    }

    #[test]
    fn box_constraints_and_monotone_dual() {
        for (seed, c) in [(1, 0.1), (2, 1.0), (3, 10.0)] {
            let (x, y) = problem(120, seed);
            let k = gram(&x, 1.0);
            let s = solve_dual(&k, &y, c, 0.01, 1e-3, 1_000_000);
            assert!(s.converged);
            assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
            // equality constraint Σ(αᵢ − αᵢ₊ₙ) = 0
            assert!(s.coefficients.iter().sum::<f64>().abs() < 1e-9);
            for w in s.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn fits_inside_the_tube() {
        let (x, y) = problem(150, 4);
        let s = fit(&x, &y, 10.0, 0.01, 5.0).unwrap();
        assert!(s.converged);
        let ModelParams::Kernel { gamma, coefficients, offset, support } = &s.params else { panic!() };
        let pred = super::super::kernel::predict(*gamma, coefficients, *offset, support, &x);
        let mae: f64 = pred.iter().zip(&y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64;
        assert!(mae < 0.03, "mae {mae}");
    }
}
