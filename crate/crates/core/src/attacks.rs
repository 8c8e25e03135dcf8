//! Black-box poisoning attacks.
//!
//! * [`flip_attack`] sees only a substitute sample. It picks the points whose
//!   targets sit closest to an end of the feasibility domain and moves each
//!   target to the opposite end, keeping the features.
//! * [`statp_attack`] samples feature vectors from a Gaussian fitted to the
//!   substitute features, rounds them to hypercube corners, asks a model for its
//!   prediction there and assigns the opposite target corner.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeasibilityDomain};
use crate::linalg::{column_means, Matrix};
use crate::regressors::{fit, predict, RegressorKind, RegressorSpec};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Relative diagonal loading applied to covariance matrices before factorization.
pub const COVARIANCE_LOADING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Poisoning rate, in `(0, 1)`.
    pub epsilon: f64,
    /// Size of the victim's clean training set.
    pub target_n: usize,
    pub domain: FeasibilityDomain,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(epsilon: f64, target_n: usize, seed: u64) -> Self {
        AttackConfig { epsilon, target_n, domain: FeasibilityDomain::default(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("epsilon must be in (0,1), got {}", self.epsilon)));
        }
        if self.target_n == 0 {
            return Err(Error::InvalidParameter("target_n must be at least 1".into()));
        }
        self.domain.validate()
    }

    /// `⌈ε·n⌉`.
    pub fn poison_count(&self) -> usize {
        poison_count(self.epsilon, self.target_n)
    }
}

/// `⌈ε·n⌉`, ignoring floating-point noise in the product (`0.07·100` is 7, not 8).
pub fn poison_count(epsilon: f64, n: usize) -> usize {
    let v = epsilon * n as f64;
    let r = libm::round(v);
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        libm::ceil(v) as usize
    }
}

/// Attacker-produced rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonSet {
    pub features: Matrix,
    pub targets: Vec<f64>,
    /// Substitute row each poison point was copied from (Flip); empty for StatP.
    #[serde(default)]
    pub source_indices: Vec<usize>,
}

impl PoisonSet {
    pub fn size(&self) -> usize {
        self.targets.len()
    }
}

/// Distance from each target to the farther end of the domain.
pub fn flip_potential(targets: &[f64], domain: &FeasibilityDomain) -> Vec<f64> {
    targets.iter().map(|&y| (y - domain.gamma_min).max(domain.gamma_max - y)).collect()
}

pub fn flip_attack(substitute: &Dataset, config: &AttackConfig) -> Result<PoisonSet> {
    config.validate()?;
    let p = config.poison_count();
    let m = substitute.n();
    if m < p {
        return Err(Error::SubstituteTooSmall { needed: p, have: m });
    }
    let dom = &config.domain;
    let delta = flip_potential(&substitute.targets, dom);
    let mut order: Vec<usize> = (0..m).collect();
    // largest potential first, lowest index among equals
    order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
    let mut chosen = order[..p].to_vec();
    chosen.sort_unstable();

    let mid = dom.midpoint();
    let targets =
        chosen.iter().map(|&i| if substitute.targets[i] > mid { dom.gamma_min } else { dom.gamma_max }).collect();
    Ok(PoisonSet { features: substitute.features.select_rows(&chosen), targets, source_indices: chosen })
}

/// Draws `count` rows from `N(mean, covariance)`. The covariance is loaded with
/// `1e-9·trace/d` on the diagonal (`1e-9` when the trace is zero) before its
/// Cholesky factorization.
pub fn sample_gaussian(mean: &[f64], covariance: &Matrix, count: usize, seed: u64) -> Result<Matrix> {
    let d = mean.len();
    if covariance.rows() != d || covariance.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: covariance.rows() });
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (covariance.get(i, j), covariance.get(j, i));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    let trace: f64 = (0..d).map(|i| covariance.get(i, i)).sum();
    let loading = if trace > 0.0 { COVARIANCE_LOADING * trace / d as f64 } else { COVARIANCE_LOADING };
    let mut cov = covariance.to_nalgebra();
    for i in 0..d {
        cov[(i, i)] += loading;
    }
    let l = cov.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let mut rng = rng_from_seed(seed);
    let mut out = Matrix::zeros(count, d);
    let mut z = alloc::vec![0.0; d];
    for r in 0..count {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let row = out.row_mut(r);
        for i in 0..d {
            row[i] = mean[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
        }
    }
    Ok(out)
}

/// Sample covariance (divisor `n − 1`).
pub fn covariance(x: &Matrix) -> Matrix {
    let n = x.rows();
    let d = x.cols();
    let m = column_means(x);
    let mut c = DMatrix::<f64>::zeros(d, d);
    for r in x.iter_rows() {
        for a in 0..d {
            let da = r[a] - m[a];
            for b in a..d {
                c[(a, b)] += da * (r[b] - m[b]);
            }
        }
    }
    let den = (n.max(2) - 1) as f64;
    let mut out = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            out.set(a, b, c[(a, b)] / den);
            out.set(b, a, c[(a, b)] / den);
        }
    }
    out
}

/// StatP. `model_query` maps corner feature vectors to model predictions.
pub fn statp_attack<F>(substitute: &Dataset, config: &AttackConfig, model_query: F) -> Result<PoisonSet>
where
    F: Fn(&Matrix) -> Result<Vec<f64>>,
{
    config.validate()?;
    let p = config.poison_count();
    if substitute.n() < 2 {
        return Err(Error::SubstituteTooSmall { needed: 2, have: substitute.n() });
    }
    let x = &substitute.features;
    let mut samples = sample_gaussian(&column_means(x), &covariance(x), p, config.seed)?;
    for r in 0..samples.rows() {
        for v in samples.row_mut(r) {
            *v = if *v >= 0.5 { 1.0 } else { 0.0 };
        }
    }
    let preds = model_query(&samples).map_err(|e| Error::OracleFailure(alloc::format!("{e}")))?;
    if preds.len() != p {
        return Err(Error::OracleFailure(alloc::format!("expected {p} predictions, got {}", preds.len())));
    }
    let dom = &config.domain;
    let mid = dom.midpoint();
    let targets = preds.iter().map(|&y| if y <= mid { dom.gamma_max } else { dom.gamma_min }).collect();
    Ok(PoisonSet { features: samples, targets, source_indices: Vec::new() })
}

/// StatP against a surrogate fitted on the substitute set itself.
pub fn statp_with_surrogate(
    substitute: &Dataset,
    config: &AttackConfig,
    surrogate: &RegressorSpec,
) -> Result<PoisonSet> {
    let model = fit(surrogate, substitute)?;
    statp_attack(substitute, config, |q| predict(&model, q))
}

/// Surrogate used when no model is supplied: kernel ridge with default settings.
pub fn default_surrogate() -> RegressorSpec {
    RegressorSpec::new(RegressorKind::KernelRidge)
}
