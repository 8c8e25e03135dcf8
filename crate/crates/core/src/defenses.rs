//! Trimmed-loss defenses.
//!
//! [`trim`] alternates between fitting on a retained subset and re-selecting the
//! `⌊N/(1+ε̂)⌋` rows with the smallest squared residuals. [`itrim`] runs it over a
//! grid of candidate rates and picks the first rate after which the training loss
//! stops changing (the kink of the loss-versus-ε̂ curve).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::regressors::{fit, predict, FittedModel, RegressorSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrimConfig {
    pub epsilon_hat: f64,
    pub max_iterations: usize,
    /// Minimum retained-loss improvement required to keep iterating.
    pub convergence_tol: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        TrimConfig { epsilon_hat: 0.14, max_iterations: 20, convergence_tol: 1e-9 }
    }
}

impl TrimConfig {
    pub fn with_epsilon(epsilon_hat: f64) -> Self {
        TrimConfig { epsilon_hat, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon_hat) {
            return Err(Error::InvalidParameter(alloc::format!(
                "epsilon_hat must be in [0,1), got {}",
                self.epsilon_hat
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidParameter("convergence_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ITrimConfig {
    pub epsilon_max: f64,
    /// Number of candidates, `0` and `epsilon_max` included.
    pub runs: usize,
    pub threshold: f64,
    /// Budget and tolerance for each candidate's trim; its `epsilon_hat` is ignored.
    pub trim: TrimConfig,
    /// Evaluate every candidate even after the kink is found, for plotting the
    /// whole loss curve. Selection is unaffected.
    pub full_trace: bool,
}

impl Default for ITrimConfig {
    fn default() -> Self {
        ITrimConfig { epsilon_max: 0.14, runs: 6, threshold: 0.001, trim: TrimConfig::default(), full_trace: false }
    }
}

impl ITrimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_max > 0.0 && self.epsilon_max < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "epsilon_max must be in (0,1), got {}",
                self.epsilon_max
            )));
        }
        if self.runs < 2 {
            return Err(Error::InvalidParameter("runs must be at least 2".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        TrimConfig { epsilon_hat: 0.0, ..self.trim }.validate()
    }

    /// `ε_max·j/(r−1)` for `j = 0..r`.
    pub fn candidates(&self) -> Vec<f64> {
        let last = (self.runs - 1) as f64;
        (0..self.runs).map(|j| self.epsilon_max * j as f64 / last).collect()
    }
}

/// One candidate of an iTrim search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub epsilon_hat: f64,
    pub train_loss: f64,
    pub retained: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The residual ranking reproduced the retained set.
    Stable,
    /// The retained loss improved by less than the tolerance.
    SmallImprovement,
    /// The refit would have increased the retained loss; the previous iterate is kept.
    LossIncrease,
    IterationBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseResult {
    /// Sorted row indices into the defended dataset.
    pub retained_indices: Vec<usize>,
    pub estimated_epsilon: f64,
    /// One point for trim; every evaluated candidate for iTrim.
    pub loss_trace: Vec<TracePoint>,
    pub final_model: FittedModel,
    /// Retained-set loss after the initial fit and after each accepted refit.
    pub iteration_losses: Vec<f64>,
    pub stop_reason: StopReason,
    /// iTrim found no flat step and fell back to `epsilon_max`.
    #[serde(default)]
    pub no_kink_found: bool,
    /// Models of every evaluated iTrim candidate, aligned with `loss_trace`.
    #[serde(skip)]
    pub candidate_models: Vec<FittedModel>,
}

impl DefenseResult {
    pub fn train_loss(&self) -> f64 {
        self.final_model.training_loss
    }
}

/// `⌊n/(1+ε̂)⌋`, ignoring floating-point noise in the quotient.
pub fn retained_count(n: usize, epsilon_hat: f64) -> usize {
    let v = n as f64 / (1.0 + epsilon_hat);
    let r = libm::round(v);
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        libm::floor(v) as usize
    }
}

/// Indices of the `k` smallest values, lowest index first among equals, sorted.
fn smallest_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

fn squared_residuals(model: &FittedModel, data: &Dataset) -> Result<Vec<f64>> {
    let pred = predict(model, &data.features)?;
    Ok(pred.iter().zip(&data.targets).map(|(p, y)| (p - y) * (p - y)).collect())
}

/// Seed of the random initial subset. Depends on the rate as well as the caller's
/// seed so iTrim candidates start from independent subsets while a direct call
/// at the selected rate reproduces iTrim's choice.
fn init_seed(seed: u64, epsilon_hat: f64) -> u64 {
    derive_seed(seed, epsilon_hat.to_bits())
}

pub fn trim(poisoned: &Dataset, spec: &RegressorSpec, config: &TrimConfig, seed: u64) -> Result<DefenseResult> {
    config.validate()?;
    let n = poisoned.n();
    let k = retained_count(n, config.epsilon_hat);
    if k < 2 {
        return Err(Error::TooFewRetained(k));
    }
    let mut retained = if k == n {
        (0..n).collect()
    } else {
        let mut rng = rng_from_seed(init_seed(seed, config.epsilon_hat));
        let mut s = rand::seq::index::sample(&mut rng, n, k).into_vec();
        s.sort_unstable();
        s
    };
    let mut model = fit(spec, &poisoned.select(&retained))?;
    let mut losses = alloc::vec![model.training_loss];
    let mut stop = StopReason::IterationBudget;

    for _ in 0..config.max_iterations {
        let next = smallest_k(&squared_residuals(&model, poisoned)?, k);
        if next == retained {
            stop = StopReason::Stable;
            break;
        }
        let refit = fit(spec, &poisoned.select(&next))?;
        let prev = *losses.last().unwrap();
        if refit.training_loss > prev {
            stop = StopReason::LossIncrease;
            break;
        }
        let improvement = prev - refit.training_loss;
        retained = next;
        model = refit;
        losses.push(model.training_loss);
        if improvement < config.convergence_tol {
            stop = StopReason::SmallImprovement;
            break;
        }
    }

    Ok(DefenseResult {
        retained_indices: retained,
        estimated_epsilon: config.epsilon_hat,
        loss_trace: alloc::vec![TracePoint {
            epsilon_hat: config.epsilon_hat,
            train_loss: model.training_loss,
            retained: k
        }],
        final_model: model,
        iteration_losses: losses,
        stop_reason: stop,
        no_kink_found: false,
        candidate_models: Vec::new(),
    })
}

/// Index of the selected candidate: the first `i ≥ 1` whose loss differs from its
/// predecessor's by less than `threshold`.
pub fn kink_index(losses: &[f64], threshold: f64) -> Option<usize> {
    (1..losses.len()).find(|&i| (losses[i] - losses[i - 1]).abs() < threshold)
}

pub fn itrim(poisoned: &Dataset, spec: &RegressorSpec, config: &ITrimConfig, seed: u64) -> Result<DefenseResult> {
    config.validate()?;
    let candidates = config.candidates();
    let last = candidates.len() - 1;
    let mut runs: Vec<DefenseResult> = Vec::with_capacity(candidates.len());
    let mut selected = None;
    for &eps in &candidates {
        let r = trim(poisoned, spec, &TrimConfig { epsilon_hat: eps, ..config.trim }, seed)?;
        runs.push(r);
        if selected.is_none() {
            let losses: Vec<f64> = runs.iter().map(DefenseResult::train_loss).collect();
            selected = kink_index(&losses, config.threshold).filter(|&i| i + 1 == runs.len());
            if selected.is_some() && !config.full_trace {
                break;
            }
        }
    }
    let no_kink = selected.is_none();
    let pick = selected.unwrap_or(last);
    let trace: Vec<TracePoint> = runs.iter().map(|r| r.loss_trace[0]).collect();
    let models: Vec<FittedModel> = runs.iter().map(|r| r.final_model.clone()).collect();
    let mut out = runs.swap_remove(pick);
    out.loss_trace = trace;
    out.no_kink_found = no_kink;
    out.candidate_models = models;
    Ok(out)
}
