//! One-hidden-layer perceptron: tanh hidden units, linear output, trained with
//! mini-batch Adam on `½·mean(f(x) − y)² + ½·α·‖W‖²` (biases unpenalized).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{ModelParams, Solved};
use crate::linalg::{mean, Matrix};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub batch_size: usize,
    pub seed: u64,
}

/// Network weights in one flat buffer laid out as `[W₁ (hidden×inputs, row-major),
/// b₁ (hidden), w₂ (hidden), b₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub inputs: usize,
    pub hidden: usize,
    pub flat: Vec<f64>,
}

impl MlpParams {
    pub fn len_for(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + 2 * hidden + 1
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        MlpParams { inputs, hidden, flat: vec![0.0; Self::len_for(inputs, hidden)] }
    }

    /// Glorot-uniform weights, zero hidden biases, output bias at `bias`.
    pub fn init(inputs: usize, hidden: usize, bias: f64, seed: u64) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        let mut rng = rng_from_seed(seed);
        let l1 = libm::sqrt(6.0 / (inputs + hidden) as f64);
        let l2 = libm::sqrt(6.0 / (hidden + 1) as f64);
        let (w1, rest) = p.flat.split_at_mut(hidden * inputs);
        w1.iter_mut().for_each(|w| *w = (2.0 * rng.random::<f64>() - 1.0) * l1);
        let (_, rest) = rest.split_at_mut(hidden);
        let (w2, b2) = rest.split_at_mut(hidden);
        w2.iter_mut().for_each(|w| *w = (2.0 * rng.random::<f64>() - 1.0) * l2);
        b2[0] = bias;
        p
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        (b1, b1 + self.hidden, b1 + 2 * self.hidden)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let (ob1, ow2, ob2) = self.offsets();
        let mut out = self.flat[ob2];
        for h in 0..self.hidden {
            let w = &self.flat[h * self.inputs..(h + 1) * self.inputs];
            let z = self.flat[ob1 + h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            out += self.flat[ow2 + h] * libm::tanh(z);
        }
        out
    }

    /// True when `index` addresses a weight (penalized) rather than a bias.
    #[cfg(test)]
    fn is_weight(&self, index: usize) -> bool {
        let (ob1, ow2, ob2) = self.offsets();
        index < ob1 || (ow2..ob2).contains(&index)
    }
}

/// Objective and gradient over the rows `rows` of `(x, y)`. `grad` is overwritten.
fn batch_objective(
    p: &MlpParams,
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    alpha: f64,
    grad: &mut [f64],
    act: &mut [f64],
) -> f64 {
    let (ob1, ow2, ob2) = p.offsets();
    let (d, hn) = (p.inputs, p.hidden);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let inv = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let xi = x.row(i);
        let mut out = p.flat[ob2];
        for h in 0..hn {
            let w = &p.flat[h * d..(h + 1) * d];
            let z = p.flat[ob1 + h] + w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            act[h] = libm::tanh(z);
            out += p.flat[ow2 + h] * act[h];
        }
        let e = out - y[i];
        loss += 0.5 * e * e;
        let es = e * inv;
        grad[ob2] += es;
        for h in 0..hn {
            grad[ow2 + h] += es * act[h];
            let dz = es * p.flat[ow2 + h] * (1.0 - act[h] * act[h]);
            grad[ob1 + h] += dz;
            for (g, xv) in grad[h * d..(h + 1) * d].iter_mut().zip(xi) {
                *g += dz * xv;
            }
        }
    }
    loss *= inv;
    if alpha > 0.0 {
        for k in (0..ob1).chain(ow2..ob2) {
            loss += 0.5 * alpha * p.flat[k] * p.flat[k];
            grad[k] += alpha * p.flat[k];
        }
    }
    loss
}

/// Full-batch objective and analytic gradient.
pub fn objective_and_gradient(p: &MlpParams, x: &Matrix, y: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
    if x.cols() != p.inputs {
        return Err(Error::DimensionMismatch { expected: p.inputs, got: x.cols() });
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    let mut grad = vec![0.0; p.flat.len()];
    let mut act = vec![0.0; p.hidden];
    let loss = batch_objective(p, x, y, &rows, alpha, &mut grad, &mut act);
    Ok((loss, grad))
}

pub(crate) fn fit(x: &Matrix, y: &[f64], cfg: &MlpConfig) -> Result<Solved> {
    if cfg.hidden == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("hidden and batch_size must be at least 1".into()));
    }
    let n = y.len();
    let mut p = MlpParams::init(x.cols(), cfg.hidden, mean(y), derive_seed(cfg.seed, 1));
    let len = p.flat.len();
    let (mut m, mut v, mut grad) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut act = vec![0.0; cfg.hidden];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 2));
    let mut step = 0usize;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            batch_objective(&p, x, y, batch, cfg.alpha, &mut grad, &mut act);
            step += 1;
            b1t *= BETA1;
            b2t *= BETA2;
            let lr = cfg.learning_rate * libm::sqrt(1.0 - b2t) / (1.0 - b1t);
            for k in 0..len {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                p.flat[k] -= lr * m[k] / (libm::sqrt(v[k]) + ADAM_EPS);
            }
        }
    }
    if p.flat.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(Solved { params: ModelParams::Mlp(p), converged: true, iterations: step })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_problem() -> (Matrix, Vec<f64>) {
        let mut rng = rng_from_seed(11);
        let x: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::from_vec(10, 3, x).unwrap();
        let y = x.iter_rows().map(|r| libm::sin(3.0 * r[0]) + r[1] * r[2]).collect();
        (x, y)
    }

    /// Central finite differences on a 10×3 problem.
    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = small_problem();
        for (hidden, alpha) in [(4, 0.0), (7, 1e-2)] {
            let p = MlpParams::init(3, hidden, 0.1, 5);
            let (_, grad) = objective_and_gradient(&p, &x, &y, alpha).unwrap();
            let h = 1e-5;
            for k in 0..p.flat.len() {
                let mut plus = p.clone();
                plus.flat[k] += h;
                let mut minus = p.clone();
                minus.flat[k] -= h;
                let fd = (objective_and_gradient(&plus, &x, &y, alpha).unwrap().0
                    - objective_and_gradient(&minus, &x, &y, alpha).unwrap().0)
                    / (2.0 * h);
                let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {k}: analytic {} vs numeric {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn penalty_skips_biases() {
        let p = MlpParams::init(2, 3, 0.0, 1);
        let weights = (0..p.flat.len()).filter(|&k| p.is_weight(k)).count();
        assert_eq!(weights, 2 * 3 + 3);
    }

    #[test]
    fn training_reduces_loss() {
        let (x, y) = small_problem();
        let cfg = MlpConfig { hidden: 8, learning_rate: 1e-2, epochs: 400, alpha: 0.0, batch_size: 4, seed: 3 };
        let init = MlpParams::init(3, 8, mean(&y), derive_seed(3, 1));
        let before = objective_and_gradient(&init, &x, &y, 0.0).unwrap().0;
        let ModelParams::Mlp(trained) = fit(&x, &y, &cfg).unwrap().params else { panic!() };
        let after = objective_and_gradient(&trained, &x, &y, 0.0).unwrap().0;
        assert!(after < 0.2 * before, "{before} -> {after}");
    }
}
