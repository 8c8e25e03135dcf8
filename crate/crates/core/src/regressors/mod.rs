//! The seven regressors behind a single fit/predict contract, and k-fold grid search.
//!
//! | kind          | objective                                              | solver |
//! |---------------|--------------------------------------------------------|--------|
//! | `Ridge`       | `‖y − Xw − b‖² + α‖w‖²`                                | Cholesky on the normal equations |
//! | `Lasso`       | `‖y − Xw − b‖²/2n + α‖w‖₁`                             | cyclic coordinate descent |
//! | `ElasticNet`  | `‖y − Xw − b‖²/2n + αρ‖w‖₁ + α(1−ρ)‖w‖²/2`             | cyclic coordinate descent |
//! | `Huber`       | `Σ H_{δσ}(yᵢ − xᵢw − b) + α‖w‖²`                       | IRLS |
//! | `KernelRidge` | `‖ỹ − Ka‖² + α aᵀKa`, RBF kernel, `ỹ = y − ȳ`          | Cholesky on `K + αI` |
//! | `Svr`         | ε-insensitive loss, RBF kernel, box `C`                | SMO on the dual |
//! | `Mlp`         | `½ mean (y − f(x))² + ½α‖W‖²`, one tanh hidden layer   | mini-batch Adam |
//!
//! All linear kinds fit an unpenalized intercept. `training_loss` is always the
//! unregularized MSE on the fit data.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::linalg::{dot, Matrix};
use crate::metrics;
use crate::{Error, Result};

mod grid;
pub mod huber;
pub mod kernel;
pub mod linear;
pub mod mlp;
pub mod svr;

pub use grid::{grid_search, HyperGrid};

/// Coefficient-change tolerance shared by the iterative linear solvers.
pub const COEF_TOL: f64 = 1e-7;
/// Sweep/iteration budget shared by the iterative linear solvers.
pub const MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Lasso,
    #[serde(rename = "elasticnet")]
    ElasticNet,
    Huber,
    #[serde(rename = "kernelridge")]
    KernelRidge,
    Svr,
    Mlp,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 7] = [
        RegressorKind::Ridge,
        RegressorKind::Lasso,
        RegressorKind::ElasticNet,
        RegressorKind::Huber,
        RegressorKind::KernelRidge,
        RegressorKind::Svr,
        RegressorKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Ridge => "ridge",
            RegressorKind::Lasso => "lasso",
            RegressorKind::ElasticNet => "elasticnet",
            RegressorKind::Huber => "huber",
            RegressorKind::KernelRidge => "kernelridge",
            RegressorKind::Svr => "svr",
            RegressorKind::Mlp => "mlp",
        }
    }

    /// Hyperparameters used when a spec leaves a key unset.
    pub fn default_hyperparams(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            RegressorKind::Ridge | RegressorKind::Lasso => &[("alpha", 1e-3)],
            RegressorKind::ElasticNet => &[("alpha", 1e-3), ("l1_ratio", 0.5)],
            RegressorKind::Huber => &[("alpha", 1e-3), ("delta", 1.0)],
            RegressorKind::KernelRidge => &[("alpha", 1e-2), ("gamma", 1.0)],
            RegressorKind::Svr => &[("c", 1.0), ("gamma", 1.0), ("epsilon", 0.01)],
            RegressorKind::Mlp => {
                &[("hidden", 16.0), ("learning_rate", 1e-3), ("epochs", 500.0), ("alpha", 1e-4), ("batch_size", 32.0)]
            }
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_lowercase();
        RegressorKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown regressor '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind) -> Self {
        RegressorSpec { kind, hyperparams: kind.default_hyperparams(), seed: 0 }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparams.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Looks up `key`, falling back to the kind's default.
    pub fn param(&self, key: &str) -> Result<f64> {
        self.hyperparams
            .get(key)
            .copied()
            .or_else(|| self.kind.default_hyperparams().get(key).copied())
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("{} has no hyperparameter '{key}'", self.kind)))
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.param(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, key: &str) -> Result<f64> {
        let v = self.param(key)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("{key} must be non-negative, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.positive(key)?;
        Ok(libm::round(v) as usize)
    }

    fn l1_ratio(&self) -> Result<f64> {
        let v = self.param("l1_ratio")?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(alloc::format!("l1_ratio must be in [0,1], got {v}")));
        }
        Ok(v)
    }
}

/// Learned parameters, by model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Linear {
        weights: Vec<f64>,
        intercept: f64,
    },
    /// `f(x) = offset + Σ coefᵢ exp(−γ‖xᵢ − x‖²)`.
    Kernel {
        gamma: f64,
        coefficients: Vec<f64>,
        offset: f64,
        support: Matrix,
    },
    Mlp(mlp::MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: RegressorSpec,
    pub params: ModelParams,
    pub training_loss: f64,
    /// False when an iterative solver ran out of budget; the best iterate is kept.
    pub converged: bool,
    pub iterations: usize,
}

impl FittedModel {
    pub fn input_dim(&self) -> usize {
        match &self.params {
            ModelParams::Linear { weights, .. } => weights.len(),
            ModelParams::Kernel { support, .. } => support.cols(),
            ModelParams::Mlp(p) => p.inputs,
        }
    }
}

pub(crate) struct Solved {
    pub params: ModelParams,
    pub converged: bool,
    pub iterations: usize,
}

/// Fits `spec` on `data`.
pub fn fit(spec: &RegressorSpec, data: &Dataset) -> Result<FittedModel> {
    if data.n() < 2 {
        return Err(Error::TooFewRows { needed: 2, have: data.n() });
    }
    if data.d() == 0 {
        return Err(Error::EmptyInput);
    }
    let x = &data.features;
    let y = &data.targets[..];
    let solved = match spec.kind {
        RegressorKind::Ridge => linear::ridge(x, y, spec.non_negative("alpha")?)?,
        RegressorKind::Lasso => linear::elastic_net(x, y, spec.non_negative("alpha")?, 1.0, COEF_TOL, MAX_SWEEPS),
        RegressorKind::ElasticNet => {
            linear::elastic_net(x, y, spec.non_negative("alpha")?, spec.l1_ratio()?, COEF_TOL, MAX_SWEEPS)
        }
        RegressorKind::Huber => {
            huber::fit(x, y, spec.non_negative("alpha")?, spec.positive("delta")?, COEF_TOL, MAX_SWEEPS)?.into()
        }
        RegressorKind::KernelRidge => kernel::kernel_ridge(x, y, spec.non_negative("alpha")?, spec.positive("gamma")?)?,
        RegressorKind::Svr => {
            svr::fit(x, y, spec.positive("c")?, spec.non_negative("epsilon")?, spec.positive("gamma")?)?
        }
        RegressorKind::Mlp => mlp::fit(
            x,
            y,
            &mlp::MlpConfig {
                hidden: spec.count("hidden")?,
                learning_rate: spec.positive("learning_rate")?,
                epochs: spec.count("epochs")?,
                alpha: spec.non_negative("alpha")?,
                batch_size: spec.count("batch_size")?,
                seed: spec.seed,
            },
        )?,
    };
    let mut model = FittedModel {
        spec: spec.clone(),
        params: solved.params,
        training_loss: 0.0,
        converged: solved.converged,
        iterations: solved.iterations,
    };
    let loss = train_loss(&model, data)?;
    if !loss.is_finite() {
        return Err(Error::SingularSystem);
    }
    model.training_loss = loss;
    Ok(model)
}

/// Predictions for every row of `features`.
pub fn predict(model: &FittedModel, features: &Matrix) -> Result<Vec<f64>> {
    if features.rows() == 0 {
        return Ok(Vec::new());
    }
    if features.cols() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: features.cols() });
    }
    Ok(match &model.params {
        ModelParams::Linear { weights, intercept } => {
            features.iter_rows().map(|r| dot(r, weights) + intercept).collect()
        }
        ModelParams::Kernel { gamma, coefficients, offset, support } => {
            kernel::predict(*gamma, coefficients, *offset, support, features)
        }
        ModelParams::Mlp(p) => features.iter_rows().map(|r| p.forward(r)).collect(),
    })
}

/// Unregularized MSE of `model` on `data`.
pub fn train_loss(model: &FittedModel, data: &Dataset) -> Result<f64> {
    let pred = predict(model, &data.features)?;
    metrics::mse(&data.targets, &pred)
}
