//! File formats, the experiment harness and the `regpoison` command line on top
//! of [`regpoison_core`].
//!
//! The typical programmatic entry point is [`harness::run_experiment`] with an
//! [`config::ExperimentConfig`]; [`figures::write_outputs`] then writes
//! `report.csv`, the figure series and the per-cell defense audits.

pub mod config;
mod error;
pub mod figures;
pub mod harness;
pub mod io;
pub mod warfarin;

pub use config::{AttackKind, DatasetSource, DefenseKind, ExperimentConfig, RegressorEntry};
pub use error::{HarnessError, Result};
pub use harness::{run_experiment, CellAudit, ExperimentOutput, ReportRow};
pub use regpoison_core as core;
