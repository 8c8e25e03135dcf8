//! Clean / poisoned / defended comparison on a warfarin dosing dataset.
//!
//! The dataset is not bundled. Point [`WARFARIN_ENV`] (or the CLI's `--input`) at
//! a CSV with a numeric dose column; without it the scenario reports
//! [`HarnessError::DatasetUnavailable`] so callers can skip it.

use std::path::{Path, PathBuf};

use regpoison_core::metrics::ratio_report;
use regpoison_core::{MetricsReport, RegressorKind};
use serde::{Deserialize, Serialize};

use crate::config::{AttackKind, DatasetSource, DefenseKind, ExperimentConfig, RegressorEntry};
use crate::error::{HarnessError, Result};
use crate::figures::median;
use crate::harness::{run_experiment, ReportRow};

pub const WARFARIN_ENV: &str = "REGPOISON_WARFARIN_CSV";
pub const DEFAULT_TARGET: &str = "Therapeutic Dose of Warfarin";
pub const SCENARIO_EPSILON: f64 = 0.02;

/// One regressor's C/P/D comparison. The median row uses regressor `"median"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub regressor: String,
    pub mae_clean: f64,
    pub mae_poisoned: f64,
    pub mae_defended: f64,
    pub mae_p_over_c: f64,
    pub mae_d_over_c: f64,
    pub acceptable_clean_pct: f64,
    pub acceptable_poisoned_pct: f64,
    pub acceptable_defended_pct: f64,
    pub acceptable_p_decrease_pct: f64,
    pub acceptable_d_decrease_pct: f64,
}

/// The CSV to use: an explicit path, else the environment variable.
pub fn locate(explicit: Option<&Path>) -> Result<PathBuf> {
    let path = explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(WARFARIN_ENV).map(PathBuf::from));
    match path {
        Some(p) if p.is_file() => Ok(p),
        Some(p) => Err(HarnessError::DatasetUnavailable(format!("{} does not exist", p.display()))),
        None => Err(HarnessError::DatasetUnavailable(format!("set {WARFARIN_ENV} to the dosing CSV"))),
    }
}

pub fn scenario_config(path: PathBuf, target: &str, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(vec![DatasetSource::Csv {
        path,
        target: target.to_string(),
        name: Some("warfarin".into()),
    }]);
    c.regressors = RegressorKind::ALL.iter().map(|&k| RegressorEntry::Kind(k)).collect();
    c.epsilons = vec![0.0, SCENARIO_EPSILON];
    c.attacks = vec![AttackKind::Flip];
    c.defenses = vec![DefenseKind::None, DefenseKind::Itrim];
    c.seed = seed;
    c
}

fn metrics_of(row: &ReportRow) -> Option<MetricsReport> {
    Some(MetricsReport {
        mse: row.mse?,
        mae_original_units: row.mae?,
        acceptable_rate_pct: row.acceptable_rate_pct?,
        n_test: row.n_test?,
    })
}

/// Builds the comparison table from experiment rows. Regressors with a failed
/// cell are left out.
pub fn scenario_table(rows: &[ReportRow]) -> Vec<ScenarioRow> {
    let find = |reg: &str, eps: f64, defense: &str| {
        rows.iter()
            .find(|r| r.is_done() && r.regressor == reg && r.epsilon == eps && r.defense == defense)
            .and_then(metrics_of)
    };
    let mut out = Vec::new();
    for kind in RegressorKind::ALL {
        let reg = kind.name();
        let (Some(c), Some(p), Some(d)) =
            (find(reg, 0.0, "none"), find(reg, SCENARIO_EPSILON, "none"), find(reg, SCENARIO_EPSILON, "itrim"))
        else {
            continue;
        };
        let Ok(r) = ratio_report(&c, &p, Some(&d)) else { continue };
        out.push(ScenarioRow {
            regressor: reg.to_string(),
            mae_clean: c.mae_original_units,
            mae_poisoned: p.mae_original_units,
            mae_defended: d.mae_original_units,
            mae_p_over_c: r.mae_p_over_c,
            mae_d_over_c: r.mae_d_over_c.unwrap(),
            acceptable_clean_pct: c.acceptable_rate_pct,
            acceptable_poisoned_pct: p.acceptable_rate_pct,
            acceptable_defended_pct: d.acceptable_rate_pct,
            acceptable_p_decrease_pct: r.acceptable_p_decrease_pct,
            acceptable_d_decrease_pct: r.acceptable_d_decrease_pct.unwrap(),
        });
    }
    if !out.is_empty() {
        let col = |f: fn(&ScenarioRow) -> f64| median(&out.iter().map(f).collect::<Vec<_>>()).unwrap();
        let m = ScenarioRow {
            regressor: "median".into(),
            mae_clean: col(|r| r.mae_clean),
            mae_poisoned: col(|r| r.mae_poisoned),
            mae_defended: col(|r| r.mae_defended),
            mae_p_over_c: col(|r| r.mae_p_over_c),
            mae_d_over_c: col(|r| r.mae_d_over_c),
            acceptable_clean_pct: col(|r| r.acceptable_clean_pct),
            acceptable_poisoned_pct: col(|r| r.acceptable_poisoned_pct),
            acceptable_defended_pct: col(|r| r.acceptable_defended_pct),
            acceptable_p_decrease_pct: col(|r| r.acceptable_p_decrease_pct),
            acceptable_d_decrease_pct: col(|r| r.acceptable_d_decrease_pct),
        };
        out.push(m);
    }
    out
}

/// Runs the three scenarios (clean, Flip at ε = 0.02, Flip plus iTrim).
pub fn warfarin_scenario(path: Option<&Path>, target: &str, seed: u64) -> Result<(Vec<ScenarioRow>, Vec<ReportRow>)> {
    let path = locate(path)?;
    let out = run_experiment(&scenario_config(path, target, seed))?;
    if let Some(bad) = out.rows.iter().find(|r| r.epsilon == 0.0 && r.defense == "none" && !r.is_done()) {
        if out.rows.iter().all(|r| !r.is_done()) {
            return Err(HarnessError::DatasetUnavailable(bad.error.clone().unwrap_or_default()));
        }
    }
    Ok((scenario_table(&out.rows), out.rows))
}
