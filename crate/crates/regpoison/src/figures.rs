//! `report.csv` and the per-figure CSV series derived from it.
//!
//! * `attack_curve.csv`: mean undefended test MSE over datasets, per attack,
//!   regressor and ε. The clean ε = 0 point is repeated under every attack.
//! * `defense_curve.csv`: per attack, defense and ε, the median over regressors
//!   of the dataset-averaged defended-MSE / clean-MSE ratio.
//! * `kink_trace.csv`: `(ε̂, train loss, test loss)` for each candidate of every
//!   audited defense run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};
use crate::harness::{CellAudit, ExperimentOutput, ReportRow};
use crate::io::{read_json, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    AttackCurve,
    DefenseCurve,
    KinkTrace,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::AttackCurve, Figure::DefenseCurve, Figure::KinkTrace];

    pub fn file_name(self) -> &'static str {
        match self {
            Figure::AttackCurve => "attack_curve.csv",
            Figure::DefenseCurve => "defense_curve.csv",
            Figure::KinkTrace => "kink_trace.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPoint {
    pub attack: String,
    pub regressor: String,
    pub epsilon: f64,
    pub mean_mse: f64,
    pub datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefensePoint {
    pub attack: String,
    pub defense: String,
    pub epsilon: f64,
    pub median_normalized_mse: f64,
    pub regressors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkRow {
    pub dataset: String,
    pub regressor: String,
    pub attack: String,
    pub epsilon: f64,
    pub defense: String,
    pub epsilon_hat: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub retained: usize,
    pub selected: bool,
}

/// Rows in deterministic order, with `f64` keys compared by bit pattern.
fn key(e: f64) -> u64 {
    e.to_bits()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median (average of the two middle values for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn attack_curve(rows: &[ReportRow]) -> Result<Vec<AttackPoint>> {
    let done: Vec<&ReportRow> = rows.iter().filter(|r| r.is_done() && r.defense == "none").collect();
    let mut attacks: Vec<String> = done.iter().filter(|r| r.attack != "none").map(|r| r.attack.clone()).collect();
    attacks.sort();
    attacks.dedup();
    if attacks.is_empty() {
        attacks.push("none".into());
    }
    let mut groups: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in &done {
        let targets: Vec<&String> = if r.attack == "none" { attacks.iter().collect() } else { vec![&r.attack] };
        for a in targets {
            groups.entry((a.clone(), r.regressor.clone(), key(r.epsilon))).or_default().push(r.mse.unwrap_or(f64::NAN));
        }
    }
    if groups.is_empty() {
        return Err(HarnessError::MissingCells("no completed undefended cells".into()));
    }
    let mut out: Vec<AttackPoint> = groups
        .into_iter()
        .map(|((attack, regressor, e), v)| AttackPoint {
            attack,
            regressor,
            epsilon: f64::from_bits(e),
            mean_mse: mean(&v),
            datasets: v.len(),
        })
        .collect();
    out.sort_by(|a, b| (&a.attack, &a.regressor).cmp(&(&b.attack, &b.regressor)).then(a.epsilon.total_cmp(&b.epsilon)));
    Ok(out)
}

pub fn defense_curve(rows: &[ReportRow]) -> Result<Vec<DefensePoint>> {
    let done: Vec<&ReportRow> = rows.iter().filter(|r| r.is_done() && r.mse_over_clean.is_some()).collect();
    if done.is_empty() {
        return Err(HarnessError::MissingCells("no cells with a clean baseline".into()));
    }
    let mut attacks: Vec<String> = done.iter().filter(|r| r.attack != "none").map(|r| r.attack.clone()).collect();
    attacks.sort();
    attacks.dedup();
    if attacks.is_empty() {
        attacks.push("none".into());
    }
    // (attack, defense, ε) → regressor → ratios over datasets
    let mut groups: BTreeMap<(String, String, u64), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in &done {
        let targets: Vec<&String> = if r.attack == "none" { attacks.iter().collect() } else { vec![&r.attack] };
        for a in targets {
            groups
                .entry((a.clone(), r.defense.clone(), key(r.epsilon)))
                .or_default()
                .entry(r.regressor.clone())
                .or_default()
                .push(r.mse_over_clean.unwrap());
        }
    }
    let mut out: Vec<DefensePoint> = groups
        .into_iter()
        .map(|((attack, defense, e), per_reg)| {
            let means: Vec<f64> = per_reg.values().map(|v| mean(v)).collect();
            DefensePoint {
                attack,
                defense,
                epsilon: f64::from_bits(e),
                median_normalized_mse: median(&means).unwrap(),
                regressors: means.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| (&a.attack, &a.defense).cmp(&(&b.attack, &b.defense)).then(a.epsilon.total_cmp(&b.epsilon)));
    Ok(out)
}

pub fn kink_trace(audits: &[CellAudit]) -> Result<Vec<KinkRow>> {
    let out: Vec<KinkRow> = audits
        .iter()
        .flat_map(|a| {
            a.loss_trace.iter().map(move |p| KinkRow {
                dataset: a.dataset.clone(),
                regressor: a.regressor.clone(),
                attack: a.attack.clone(),
                epsilon: a.epsilon,
                defense: a.defense.clone(),
                epsilon_hat: p.epsilon_hat,
                train_loss: p.train_loss,
                test_loss: p.test_loss,
                retained: p.retained,
                selected: p.epsilon_hat == a.estimated_epsilon,
            })
        })
        .collect();
    if out.is_empty() {
        return Err(HarnessError::MissingCells("no defense audits".into()));
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().at(path)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    if !path.is_file() {
        return Err(HarnessError::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<ReportRow>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

pub fn read_audits(dir: &Path) -> Result<Vec<CellAudit>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<_> = fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

/// Writes the figure series for `rows`/`audits` under `dir`. Figures whose input
/// cells are missing are skipped and returned with the reason.
pub fn write_figures(dir: &Path, rows: &[ReportRow], audits: &[CellAudit]) -> Result<Vec<(Figure, String)>> {
    let mut skipped = Vec::new();
    for fig in Figure::ALL {
        let path = dir.join(fig.file_name());
        let res = match fig {
            Figure::AttackCurve => attack_curve(rows).and_then(|s| write_csv(&path, &s)),
            Figure::DefenseCurve => defense_curve(rows).and_then(|s| write_csv(&path, &s)),
            Figure::KinkTrace => kink_trace(audits).and_then(|s| write_csv(&path, &s)),
        };
        match res {
            Err(HarnessError::MissingCells(why)) => skipped.push((fig, why)),
            other => other?,
        }
    }
    Ok(skipped)
}

/// `report.csv`, `figures/` and `cells/` under `out`.
pub fn write_outputs(out: &Path, result: &ExperimentOutput) -> Result<Vec<(Figure, String)>> {
    write_csv(&out.join("report.csv"), &result.rows)?;
    let cells = out.join("cells");
    fs::create_dir_all(&cells).at(&cells)?;
    for a in &result.audits {
        write_json(&cells.join(a.file_name()), a)?;
    }
    write_figures(&out.join("figures"), &result.rows, &result.audits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::CellStatus;

    fn row(attack: &str, reg: &str, eps: f64, defense: &str, mse: f64, ratio: Option<f64>) -> ReportRow {
        let mut r: ReportRow = serde_json::from_value(serde_json::json!({
            "dataset": "d", "regressor": reg, "attack": attack, "epsilon": eps, "defense": defense,
            "status": "done", "error": null, "seed": 0, "hyperparams": null, "n_train": null, "n_poison": null,
            "n_test": null, "mse": mse, "mae": null, "acceptable_rate_pct": null, "mse_over_clean": ratio,
            "mae_over_clean": null, "train_loss": null, "retained": null, "estimated_epsilon": null,
            "no_kink_found": null, "stop_reason": null, "poison_removed": null, "statp_oracle": null, "wall_ms": 0
        }))
        .unwrap();
        r.status = CellStatus::Done;
        r
    }

    #[test]
    fn curves_from_rows() {
        let rows = vec![
            row("none", "ridge", 0.0, "none", 0.01, Some(1.0)),
            row("none", "ridge", 0.0, "trim", 0.011, Some(1.1)),
            row("flip", "ridge", 0.04, "none", 0.03, Some(3.0)),
            row("flip", "ridge", 0.04, "trim", 0.012, Some(1.2)),
            row("none", "lasso", 0.0, "none", 0.02, Some(1.0)),
            row("flip", "lasso", 0.04, "trim", 0.03, Some(1.5)),
        ];
        let a = attack_curve(&rows).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!((a[1].regressor.as_str(), a[1].epsilon, a[1].mean_mse), ("ridge", 0.0, 0.01));
        let d = defense_curve(&rows).unwrap();
        let clean = d.iter().find(|p| p.defense == "none" && p.epsilon == 0.0).unwrap();
        assert_eq!(clean.median_normalized_mse, 1.0);
        let trim4 = d.iter().find(|p| p.defense == "trim" && p.epsilon == 0.04).unwrap();
        assert!((trim4.median_normalized_mse - 1.35).abs() < 1e-12);
        assert!(matches!(kink_trace(&[]), Err(HarnessError::MissingCells(_))));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("flip", "svr", 0.02, "itrim", 0.5, None)];
        let p = dir.path().join("report.csv");
        write_csv(&p, &rows).unwrap();
        assert_eq!(read_report(&p).unwrap(), rows);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
