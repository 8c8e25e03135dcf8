//! Huber regression by iteratively reweighted least squares.
//!
//! The threshold is `δ·σ`, where `σ = 1.4826·MAD` of the residuals of the initial
//! (unweighted) ridge fit. `σ` is held fixed afterwards, so every IRLS step is a
//! majorize-minimize step on one objective and the objective never increases.

use alloc::vec::Vec;

use super::{ModelParams, Solved};
use crate::linalg::{dot, weighted_ridge, Matrix};
use crate::Result;

const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone)]
pub struct HuberFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Absolute threshold `δ·σ`.
    pub threshold: f64,
    /// Objective after the initial fit and after every IRLS step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl From<HuberFit> for Solved {
    fn from(h: HuberFit) -> Self {
        Solved {
            params: ModelParams::Linear { weights: h.weights, intercept: h.intercept },
            converged: h.converged,
            iterations: h.iterations,
        }
    }
}

#[inline]
fn huber_rho(r: f64, c: f64) -> f64 {
    let a = r.abs();
    if a <= c {
        0.5 * r * r
    } else {
        c * a - 0.5 * c * c
    }
}

fn residuals(x: &Matrix, y: &[f64], w: &[f64], b: f64) -> Vec<f64> {
    x.iter_rows().zip(y).map(|(r, t)| t - dot(r, w) - b).collect()
}

/// `Σ ρ_c(rᵢ) + α‖w‖²`.
pub fn objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, alpha: f64, c: f64) -> f64 {
    residuals(x, y, w, b).iter().map(|&r| huber_rho(r, c)).sum::<f64>() + alpha * dot(w, w)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust residual scale, floored so the threshold stays positive on exact fits.
pub fn robust_scale(resid: &[f64]) -> f64 {
    let mut r = resid.to_vec();
    let med = median(&mut r);
    let mut dev: Vec<f64> = resid.iter().map(|v| (v - med).abs()).collect();
    (MAD_TO_SIGMA * median(&mut dev)).max(1e-12)
}

pub fn fit(x: &Matrix, y: &[f64], alpha: f64, delta: f64, tol: f64, max_iter: usize) -> Result<HuberFit> {
    // ½Σr² + α‖w‖² is minimized by the ridge system with 2α on the diagonal
    let (mut w, mut b) = weighted_ridge(x, y, None, 2.0 * alpha)?;
    let c = delta * robust_scale(&residuals(x, y, &w, b));
    let mut trace = alloc::vec![objective(x, y, &w, b, alpha, c)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let weights: Vec<f64> = residuals(x, y, &w, b)
            .iter()
            .map(|r| {
                let a = r.abs();
                if a <= c {
                    1.0
                } else {
                    c / a
                }
            })
            .collect();
        let (nw, nb) = weighted_ridge(x, y, Some(&weights), 2.0 * alpha)?;
        let change = nw.iter().zip(&w).map(|(a, o)| (a - o).abs()).fold((nb - b).abs(), f64::max);
        w = nw;
        b = nb;
        trace.push(objective(x, y, &w, b, alpha, c));
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(HuberFit { weights: w, intercept: b, threshold: c, objective_trace: trace, iterations, converged })
}
