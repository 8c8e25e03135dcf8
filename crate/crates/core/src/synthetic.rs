//! Seeded synthetic regression problems.
//!
//! Features are drawn from a Gaussian, so after min-max scaling most rows sit in
//! the interior of the unit hypercube and its corners are sparsely populated.
//! Noise is specified relative to the standard deviation of the noiseless signal.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::RawDataset;
use crate::linalg::{mean, Matrix};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// `y = xᵀβ` with `β` uniform in `[−1, 1]`.
    Linear,
    /// `y = xᵀβ + ½ Σ βⱼ |xⱼ − τⱼ|`: a linear trend with one kink per feature.
    Piecewise,
    /// `10 sin(π x₁x₂) + 20 (x₃ − ½)² + 10 x₄ + 5 x₅`; remaining columns are irrelevant.
    Friedman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    /// Noise standard deviation as a multiple of the signal's standard deviation.
    pub noise: f64,
    pub seed: u64,
}

/// Default noise-to-signal ratio of [`default_suite`].
pub const DEFAULT_NOISE: f64 = 0.2;

/// Standard deviation of Friedman features around 0.5. Wider spreads make the
/// quadratic term dominate, and a linear fit then leaves heavy-tailed residuals.
const FRIEDMAN_SPREAD: f64 = 0.15;

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, d: usize, seed: u64) -> Self {
        let tag = match kind {
            SyntheticKind::Linear => "linear",
            SyntheticKind::Piecewise => "piecewise",
            SyntheticKind::Friedman => "friedman",
        };
        SyntheticSpec { name: format!("{tag}_d{d}"), kind, n, d, noise: DEFAULT_NOISE, seed }
    }
}

/// Five problems with `n = 2000`: linear (d = 5, 20), piecewise (d = 5) and
/// Friedman (d = 5, 20).
pub fn default_suite(seed: u64) -> Vec<SyntheticSpec> {
    use SyntheticKind::*;
    [(Linear, 5), (Linear, 20), (Piecewise, 5), (Friedman, 5), (Friedman, 20)]
        .iter()
        .enumerate()
        .map(|(i, &(k, d))| SyntheticSpec::new(k, 2000, d, derive_seed(seed, i as u64)))
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<RawDataset> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.kind == SyntheticKind::Friedman && spec.d < 5 {
        return Err(Error::InvalidParameter(format!("friedman needs d >= 5, got {}", spec.d)));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be non-negative, got {}", spec.noise)));
    }
    let (n, d) = (spec.n, spec.d);
    let mut rng = rng_from_seed(derive_seed(spec.seed, 0));
    let coef: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let knots: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut rng = rng_from_seed(derive_seed(spec.seed, 1));
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for v in x.row_mut(i) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = match spec.kind {
                SyntheticKind::Friedman => 0.5 + FRIEDMAN_SPREAD * z,
                _ => z,
            };
        }
    }
    let signal: Vec<f64> = x
        .iter_rows()
        .map(|r| match spec.kind {
            SyntheticKind::Linear => r.iter().zip(&coef).map(|(a, b)| a * b).sum(),
            SyntheticKind::Piecewise => {
                r.iter().zip(&coef).zip(&knots).map(|((a, b), t)| b * (a + 0.5 * (a - t).abs())).sum()
            }
            SyntheticKind::Friedman => {
                10.0 * libm::sin(core::f64::consts::PI * r[0] * r[1])
                    + 20.0 * (r[2] - 0.5) * (r[2] - 0.5)
                    + 10.0 * r[3]
                    + 5.0 * r[4]
            }
        })
        .collect();
    let m = mean(&signal);
    let sd = libm::sqrt(signal.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / n as f64);
    let scale = spec.noise * sd;
    let mut rng = rng_from_seed(derive_seed(spec.seed, 2));
    let targets = signal
        .iter()
        .map(|s| {
            let e: f64 = StandardNormal.sample(&mut rng);
            s + scale * e
        })
        .collect();
    let mut names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    names.push("y".into());
    RawDataset::new(spec.name.clone(), names, x, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shape() {
        let suite = default_suite(0);
        assert_eq!(suite.len(), 5);
        for s in &suite {
            let raw = generate(s).unwrap();
            assert_eq!((raw.n(), raw.d()), (2000, s.d));
            assert_eq!(raw.column_names.len(), s.d + 1);
        }
        assert_eq!(generate(&suite[0]).unwrap(), generate(&suite[0]).unwrap());
    }

    #[test]
    fn noise_free_linear_is_exact() {
        let mut s = SyntheticSpec::new(SyntheticKind::Linear, 50, 3, 4);
        s.noise = 0.0;
        let raw = generate(&s).unwrap();
        let d = crate::Dataset::new(raw.features.clone(), raw.targets.clone()).unwrap();
        let m = crate::fit(&crate::RegressorSpec::new(crate::RegressorKind::Ridge).with("alpha", 1e-12), &d).unwrap();
        assert!(m.training_loss < 1e-18);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&SyntheticSpec::new(SyntheticKind::Friedman, 10, 3, 0)).is_err());
        assert!(generate(&SyntheticSpec::new(SyntheticKind::Linear, 0, 3, 0)).is_err());
    }
}
