//! Datasets, min-max scaling, the substitute/train/test split, subsampling and
//! poison injection.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::attacks::PoisonSet;
use crate::linalg::Matrix;
use crate::rng::{permutation, rng_from_seed};
use crate::{Error, Result};

/// Fraction of rows handed to the attacker as a substitute set.
pub const SUBSTITUTE_FRACTION: (usize, usize) = (1, 4);
/// Fraction of rows used for training (0.75 * 0.8).
pub const TRAIN_FRACTION: (usize, usize) = (3, 5);

/// Data as loaded, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub name: String,
    /// Feature column names followed by the target column name.
    pub column_names: Vec<String>,
    pub features: Matrix,
    pub targets: Vec<f64>,
}

impl RawDataset {
    pub fn new(
        name: impl Into<String>,
        column_names: Vec<String>,
        features: Matrix,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        if features.rows() != targets.len() {
            return Err(Error::LengthMismatch(features.rows(), targets.len()));
        }
        if column_names.len() != features.cols() + 1 {
            return Err(Error::DimensionMismatch { expected: features.cols() + 1, got: column_names.len() });
        }
        if features.as_slice().iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value in dataset".into()));
        }
        Ok(RawDataset { name: name.into(), column_names, features, targets })
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    fn select(&self, indices: &[usize]) -> RawDataset {
        RawDataset {
            name: self.name.clone(),
            column_names: self.column_names.clone(),
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Per-column minimum and maximum. The last entry covers the target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub column_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    pub fn columns(&self) -> usize {
        self.min.len()
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.min[j] == self.max[j]
    }

    pub fn target_index(&self) -> usize {
        self.min.len() - 1
    }

    /// Maps a value of column `j` into `[0, 1]`, clamping values outside the fitted range.
    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        if self.is_constant(j) {
            return 0.0;
        }
        ((v - self.min[j]) / (self.max[j] - self.min[j])).clamp(0.0, 1.0)
    }
}

/// A dataset in scaled units. Features and targets produced by [`apply_scaler`] lie
/// in `[0, 1]`; hand-built datasets only need to be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub scaling: Option<Arc<ScalingParams>>,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Vec<f64>) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::LengthMismatch(features.rows(), targets.len()));
        }
        if features.as_slice().iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value in dataset".into()));
        }
        Ok(Dataset { features, targets, scaling: None })
    }

    pub fn with_scaling(mut self, scaling: Option<Arc<ScalingParams>>) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn is_unit_scaled(&self) -> bool {
        self.features.as_slice().iter().chain(&self.targets).all(|v| (0.0..=1.0).contains(v))
    }

    /// Rows `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            scaling: self.scaling.clone(),
        }
    }
}

/// A training set after poison injection. `provenance[i]` is true for injected rows.
///
/// Defenses take a [`Dataset`] and never see this struct; the mask exists so the
/// harness can score how much true poison a defense removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonedDataset {
    pub data: Dataset,
    pub provenance: Vec<bool>,
}

impl PoisonedDataset {
    pub fn poison_count(&self) -> usize {
        self.provenance.iter().filter(|&&p| p).count()
    }

    /// Fraction of injected rows that are absent from `retained`.
    pub fn poison_removed_fraction(&self, retained: &[usize]) -> Option<f64> {
        let total = self.poison_count();
        if total == 0 {
            return None;
        }
        let kept = retained.iter().filter(|&&i| self.provenance[i]).count();
        Some((total - kept) as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplits {
    pub substitute: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub substitute_indices: Vec<usize>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Interval of target values that do not raise suspicion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityDomain {
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl FeasibilityDomain {
    pub fn new(gamma_min: f64, gamma_max: f64) -> Result<Self> {
        let d = FeasibilityDomain { gamma_min, gamma_max };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_min.is_finite() && self.gamma_max.is_finite()) || self.gamma_min >= self.gamma_max {
            return Err(Error::DegenerateDomain(self.gamma_min, self.gamma_max));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.gamma_min + self.gamma_max)
    }
}

impl Default for FeasibilityDomain {
    fn default() -> Self {
        FeasibilityDomain { gamma_min: 0.0, gamma_max: 1.0 }
    }
}

pub fn fit_scaler(raw: &RawDataset) -> ScalingParams {
    let cols = raw.d() + 1;
    let mut min = alloc::vec![f64::INFINITY; cols];
    let mut max = alloc::vec![f64::NEG_INFINITY; cols];
    let mut update = |j: usize, v: f64| {
        min[j] = min[j].min(v);
        max[j] = max[j].max(v);
    };
    for (row, &t) in raw.features.iter_rows().zip(&raw.targets) {
        for (j, &v) in row.iter().enumerate() {
            update(j, v);
        }
        update(cols - 1, t);
    }
    ScalingParams { column_names: raw.column_names.clone(), min, max }
}

pub fn apply_scaler(raw: &RawDataset, params: &Arc<ScalingParams>) -> Result<Dataset> {
    if params.columns() != raw.d() + 1 {
        return Err(Error::DimensionMismatch { expected: params.columns(), got: raw.d() + 1 });
    }
    let d = raw.d();
    let mut features = raw.features.clone();
    for i in 0..features.rows() {
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            *v = params.scale(j, *v);
        }
    }
    let targets = raw.targets.iter().map(|&t| params.scale(d, t)).collect();
    Ok(Dataset { features, targets, scaling: Some(params.clone()) })
}

/// Maps a scaled target back to original units.
pub fn invert_target(params: &ScalingParams, scaled: f64) -> Result<f64> {
    let t = params.target_index();
    if params.is_constant(t) {
        return Err(Error::ConstantTargetColumn);
    }
    Ok(scaled * (params.max[t] - params.min[t]) + params.min[t])
}

/// Shuffles rows with `seed` and partitions them into substitute (⌊n/4⌋), train
/// (⌊3n/5⌋) and test (the remainder).
pub fn split(data: &Dataset, seed: u64) -> Result<DataSplits> {
    let n = data.n();
    if n < 10 {
        return Err(Error::TooFewRows { needed: 10, have: n });
    }
    let perm = permutation(n, seed);
    let n_sub = n * SUBSTITUTE_FRACTION.0 / SUBSTITUTE_FRACTION.1;
    let n_train = n * TRAIN_FRACTION.0 / TRAIN_FRACTION.1;
    let substitute_indices = perm[..n_sub].to_vec();
    let train_indices = perm[n_sub..n_sub + n_train].to_vec();
    let test_indices = perm[n_sub + n_train..].to_vec();
    Ok(DataSplits {
        substitute: data.select(&substitute_indices),
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        substitute_indices,
        train_indices,
        test_indices,
        seed,
    })
}

/// Uniform random subset of at most `cap` rows; original row order is kept.
pub fn subsample(raw: &RawDataset, cap: usize, seed: u64) -> RawDataset {
    let n = raw.n();
    if n <= cap {
        return raw.clone();
    }
    let mut picked = index::sample(&mut rng_from_seed(seed), n, cap.max(1)).into_vec();
    picked.sort_unstable();
    raw.select(&picked)
}

/// Appends `poison` to `train` and shuffles the result.
pub fn append_and_shuffle(train: &Dataset, poison: &PoisonSet, seed: u64) -> Result<PoisonedDataset> {
    if poison.size() > 0 && poison.features.cols() != train.d() {
        return Err(Error::DimensionMismatch { expected: train.d(), got: poison.features.cols() });
    }
    let n = train.n() + poison.size();
    let order = permutation(n, seed);
    let d = train.d();
    let mut data = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for &src in &order {
        if src < train.n() {
            data.extend_from_slice(train.features.row(src));
            targets.push(train.targets[src]);
            provenance.push(false);
        } else {
            let p = src - train.n();
            data.extend_from_slice(poison.features.row(p));
            targets.push(poison.targets[p]);
            provenance.push(true);
        }
    }
    Ok(PoisonedDataset {
        data: Dataset { features: Matrix::from_vec(n, d, data)?, targets, scaling: train.scaling.clone() },
        provenance,
    })
}
