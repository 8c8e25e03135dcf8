//! CSV ingestion and the on-disk dataset format.
//!
//! A dataset file is a headered CSV whose last column is the target. Next to it,
//! `<stem>.meta.json` records how the rows were produced (scaling parameters,
//! seed, source indices, poison provenance) so a run can be reproduced exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regpoison_core::{Dataset, Matrix, RawDataset, ScalingParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};

/// Summary of what [`load_csv`] kept and discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    /// Non-target columns that were not numeric in most rows.
    pub ignored_columns: Vec<String>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Finds `target` by exact header name, falling back to a zero-based index.
fn resolve_target(headers: &[String], target: &str) -> Result<usize> {
    if let Some(i) = headers.iter().position(|h| h == target) {
        return Ok(i);
    }
    match target.parse::<usize>() {
        Ok(i) if i < headers.len() => Ok(i),
        _ => Err(HarnessError::MissingTargetColumn(target.to_string())),
    }
}

/// Loads a headered CSV. The target column is chosen by name or index; every
/// other column whose cells parse as finite numbers in more than half of the rows
/// becomes a feature. Rows with an unparseable or non-finite feature or target
/// cell are dropped.
pub fn load_csv(path: &Path, target: &str) -> Result<(RawDataset, LoadReport)> {
    if !path.is_file() {
        return Err(HarnessError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let t = resolve_target(&headers, target)?;
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        cells.push((0..headers.len()).map(|j| rec.get(j).and_then(parse_cell)).collect());
    }
    let rows_read = cells.len();

    let mut feature_cols = Vec::new();
    let mut ignored_columns = Vec::new();
    for j in (0..headers.len()).filter(|&j| j != t) {
        let numeric = cells.iter().filter(|r| r[j].is_some()).count();
        if 2 * numeric > rows_read {
            feature_cols.push(j);
        } else {
            ignored_columns.push(headers[j].clone());
        }
    }
    if feature_cols.is_empty() {
        return Err(HarnessError::NoFeatureColumns);
    }

    let mut data = Vec::new();
    let mut targets = Vec::new();
    for row in &cells {
        let (Some(y), true) = (row[t], feature_cols.iter().all(|&j| row[j].is_some())) else {
            continue;
        };
        data.extend(feature_cols.iter().map(|&j| row[j].unwrap()));
        targets.push(y);
    }
    let rows_dropped = rows_read - targets.len();
    if targets.is_empty() {
        return Err(HarnessError::EmptyAfterFiltering { dropped: rows_dropped });
    }
    let mut names: Vec<String> = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    names.push(headers[t].clone());
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let n = targets.len();
    let raw = RawDataset::new(name, names, Matrix::from_vec(n, feature_cols.len(), data)?, targets)?;
    Ok((raw, LoadReport { rows_read, rows_dropped, ignored_columns }))
}

/// Sidecar metadata for a dataset file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Row indices into the scaled source dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    /// `true` for injected rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<bool>>,
    /// Substitute rows that poison points were copied from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).at(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").at(path)?;
    w.flush().at(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(HarnessError::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_reader(BufReader::new(File::open(path).at(path)?))?)
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).chain(std::iter::once("y".to_string())).collect()
}

/// Writes features and target as CSV (shortest round-trip float formatting) plus
/// the sidecar.
pub fn write_dataset(path: &Path, data: &Dataset, column_names: Option<&[String]>, meta: &DatasetMeta) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let names = match column_names {
        Some(n) if n.len() == data.d() + 1 => n.to_vec(),
        _ => default_names(data.d()),
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&names)?;
    let mut rec = Vec::with_capacity(data.d() + 1);
    for (row, y) in data.features.iter_rows().zip(&data.targets) {
        rec.clear();
        rec.extend(row.iter().chain(std::iter::once(y)).map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().at(path)?;
    write_json(&sidecar_path(path), meta)
}

/// Reads a file written by [`write_dataset`]. The sidecar is optional; without it
/// the dataset carries no scaling parameters.
pub fn read_dataset(path: &Path) -> Result<(Dataset, Vec<String>, DatasetMeta)> {
    if !path.is_file() {
        return Err(HarnessError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.len() < 2 {
        return Err(HarnessError::NoFeatureColumns);
    }
    let d = names.len() - 1;
    let mut data = Vec::new();
    let mut targets = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let values: Option<Vec<f64>> = rec.iter().map(parse_cell).collect();
        let values = values.filter(|v| v.len() == d + 1).ok_or_else(|| {
            HarnessError::ConfigInvalid(format!("{}: row {} is not {} finite numbers", path.display(), line + 1, d + 1))
        })?;
        data.extend_from_slice(&values[..d]);
        targets.push(values[d]);
    }
    let sidecar = sidecar_path(path);
    let meta: DatasetMeta = if sidecar.is_file() { read_json(&sidecar)? } else { DatasetMeta::default() };
    let n = targets.len();
    let ds = Dataset::new(Matrix::from_vec(n, d, data)?, targets)?.with_scaling(meta.scaling.clone().map(Arc::new));
    Ok((ds, names, meta))
}
