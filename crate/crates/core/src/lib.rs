//! Black-box data poisoning for regression learning, and trimmed-loss defenses.
//!
//! This crate holds the numerical core: dataset scaling and splitting, seven
//! regressors behind one `fit`/`predict` contract, the Flip and StatP attacks,
//! the Trim and iTrim defenses, and the evaluation metrics. It builds without
//! `std` (only `alloc` is required); file formats, the experiment harness and
//! the command line live in the `regpoison` crate.
//!
//! All randomness flows from explicit 64-bit seeds, so every operation is a
//! pure function of its inputs.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attacks;
pub mod dataset;
pub mod defenses;
mod error;
pub mod linalg;
pub mod metrics;
pub mod regressors;
pub mod rng;
pub mod synthetic;

pub use attacks::{flip_attack, sample_gaussian, statp_attack, AttackConfig, PoisonSet};
pub use dataset::{
    append_and_shuffle, apply_scaler, fit_scaler, invert_target, split, subsample, DataSplits, Dataset,
    FeasibilityDomain, PoisonedDataset, RawDataset, ScalingParams,
};
pub use defenses::{itrim, trim, DefenseResult, ITrimConfig, TrimConfig};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{acceptable_rate, mae, mse, ratio_report, MetricsReport, RatioRow};
pub use regressors::{fit, grid_search, predict, train_loss, FittedModel, HyperGrid, RegressorKind, RegressorSpec};
