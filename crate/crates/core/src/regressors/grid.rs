//! Hyperparameter grids and seeded k-fold cross-validated grid search.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{fit, predict, RegressorKind, RegressorSpec};
use crate::dataset::Dataset;
use crate::metrics::mse;
use crate::rng::{derive_seed, permutation};
use crate::{Error, Result};

/// Default number of cross-validation folds.
pub const DEFAULT_FOLDS: usize = 3;

const FOLD_STREAM: u64 = 0xf01d;

/// Candidate values per hyperparameter. Keys absent from the grid take the kind's
/// defaults; grid points are the cartesian product in key order (last key fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub params: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

impl HyperGrid {
    pub fn new(folds: usize) -> Self {
        HyperGrid { params: BTreeMap::new(), folds }
    }

    pub fn with(mut self, key: &str, values: &[f64]) -> Self {
        self.params.insert(key.to_string(), values.to_vec());
        self
    }

    /// The default search space for `kind`.
    pub fn default_for(kind: RegressorKind) -> Self {
        const ALPHAS: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        const GAMMAS: [f64; 3] = [0.1, 1.0, 10.0];
        let g = HyperGrid::new(DEFAULT_FOLDS);
        match kind {
            RegressorKind::Ridge | RegressorKind::Lasso => g.with("alpha", &ALPHAS),
            RegressorKind::ElasticNet => g.with("alpha", &ALPHAS).with("l1_ratio", &[0.25, 0.5, 0.75]),
            RegressorKind::Huber => g.with("alpha", &ALPHAS).with("delta", &[0.1, 1.0]),
            RegressorKind::KernelRidge => g.with("alpha", &ALPHAS).with("gamma", &GAMMAS),
            RegressorKind::Svr => g.with("c", &[0.1, 1.0, 10.0]).with("gamma", &GAMMAS).with("epsilon", &[0.01]),
            RegressorKind::Mlp => g.with("hidden", &[16.0, 64.0]).with("epochs", &[500.0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter("grid search needs at least 2 folds".into()));
        }
        if let Some((k, _)) = self.params.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidParameter(alloc::format!("grid for '{k}' is empty")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `index`-th grid point as a key→value map.
    pub fn point(&self, index: usize) -> BTreeMap<String, f64> {
        let mut rem = index;
        let mut out = BTreeMap::new();
        for (k, vals) in self.params.iter().rev() {
            out.insert(k.clone(), vals[rem % vals.len()]);
            rem /= vals.len();
        }
        out
    }
}

/// Mean validation MSE of `spec` over the given folds; failed fits score `+∞`.
fn cv_score(spec: &RegressorSpec, data: &Dataset, folds: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for (f, val) in folds.iter().enumerate() {
        let train: Vec<usize> =
            folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        let fold_train = data.select(&train);
        let fold_val = data.select(val);
        let score = fit(spec, &fold_train)
            .and_then(|m| predict(&m, &fold_val.features))
            .and_then(|p| mse(&fold_val.targets, &p));
        match score {
            Ok(s) if s.is_finite() => total += s,
            _ => return f64::INFINITY,
        }
    }
    total / folds.len() as f64
}

/// Seeded k-fold partition: fold `f` holds the shuffled positions `f, f+k, f+2k, …`.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let perm = permutation(n, derive_seed(seed, FOLD_STREAM));
    (0..folds).map(|f| perm.iter().skip(f).step_by(folds).copied().collect()).collect()
}

/// Per-point CV scores, in grid order.
pub fn grid_scores(
    kind: RegressorKind,
    grid: &HyperGrid,
    data: &Dataset,
    seed: u64,
) -> Result<Vec<(RegressorSpec, f64)>> {
    grid.validate()?;
    if data.n() < grid.folds {
        return Err(Error::TooFewRows { needed: grid.folds, have: data.n() });
    }
    let folds = kfold(data.n(), grid.folds, seed);
    Ok((0..grid.len())
        .map(|i| {
            let mut spec = RegressorSpec::new(kind).with_seed(seed);
            spec.hyperparams.extend(grid.point(i));
            let s = cv_score(&spec, data, &folds);
            (spec, s)
        })
        .collect())
}

/// Returns the grid point with the lowest mean validation MSE; ties go to the
/// smallest grid index.
pub fn grid_search(kind: RegressorKind, grid: &HyperGrid, data: &Dataset, seed: u64) -> Result<RegressorSpec> {
    let scores = grid_scores(kind, grid, data, seed)?;
    let mut best: Option<(RegressorSpec, f64)> = None;
    for (spec, s) in scores {
        if best.as_ref().is_none_or(|(_, b)| s < *b) {
            best = Some((spec, s));
        }
    }
    match best {
        Some((spec, s)) if s.is_finite() => Ok(spec),
        _ => Err(Error::SingularSystem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::rng::rng_from_seed;
    use rand::RngExt;

    fn linear(n: usize, noise: f64, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..n * 3).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::from_vec(n, 3, x).unwrap();
        let y =
            x.iter_rows().map(|r| 0.2 * r[0] + 0.5 * r[1] + 0.1 * r[2] + noise * (rng.random::<f64>() - 0.5)).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn enumerates_cartesian_product() {
        let g = HyperGrid::new(3).with("a", &[1.0, 2.0]).with("b", &[10.0, 20.0, 30.0]);
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(0)["a"], 1.0);
        assert_eq!(g.point(0)["b"], 10.0);
        assert_eq!(g.point(1)["b"], 20.0);
        assert_eq!(g.point(3)["a"], 2.0);
        assert_eq!(g.point(5)["b"], 30.0);
    }

    #[test]
    fn single_point_grid_returns_it() {
        let d = linear(30, 0.1, 1);
        let g = HyperGrid::new(3).with("alpha", &[0.37]);
        let s = grid_search(RegressorKind::Ridge, &g, &d, 4).unwrap();
        assert_eq!(s.hyperparams["alpha"], 0.37);
    }

    /// Both candidates scored by an explicit CV loop over the same folds.
    #[test]
    fn ridge_prefers_small_alpha_on_clean_linear_data() {
        let d = linear(90, 1e-3, 2);
        let g = HyperGrid::new(3).with("alpha", &[1e-6, 1e3]);
        let folds = kfold(d.n(), 3, 8);
        let mut manual = Vec::new();
        for alpha in [1e-6, 1e3] {
            let spec = RegressorSpec::new(RegressorKind::Ridge).with("alpha", alpha);
            let mut tot = 0.0;
            for f in 0..3 {
                let tr: Vec<usize> = (0..3).filter(|&g| g != f).flat_map(|g| folds[g].clone()).collect();
                let m = fit(&spec, &d.select(&tr)).unwrap();
                let v = d.select(&folds[f]);
                tot += mse(&v.targets, &predict(&m, &v.features).unwrap()).unwrap();
            }
            manual.push(tot / 3.0);
        }
        assert!(manual[0] < manual[1]);
        let chosen = grid_search(RegressorKind::Ridge, &g, &d, 8).unwrap();
        assert_eq!(chosen.hyperparams["alpha"], 1e-6);
        assert_eq!(chosen, grid_search(RegressorKind::Ridge, &g, &d, 8).unwrap());
    }

    #[test]
    fn folds_partition_rows() {
        let f = kfold(31, 3, 5);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..31).collect::<Vec<_>>());
        assert_eq!(f, kfold(31, 3, 5));
    }

    #[test]
    fn too_few_rows_and_bad_grids() {
        let d = linear(2, 0.1, 3);
        let g = HyperGrid::new(3).with("alpha", &[1.0]);
        assert!(matches!(grid_search(RegressorKind::Ridge, &g, &d, 0), Err(Error::TooFewRows { .. })));
        let empty = HyperGrid::new(3).with("alpha", &[]);
        assert!(grid_search(RegressorKind::Ridge, &empty, &linear(20, 0.1, 3), 0).is_err());
        assert!(grid_search(RegressorKind::Ridge, &HyperGrid::new(1), &linear(20, 0.1, 3), 0).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        /// Reordering candidates never changes the winner unless scores tie.
        #[test]
        fn selection_ignores_enumeration_order(seed in 0u64..1000, rot in 0usize..5) {
            let d = linear(40, 0.2, seed);
            let mut alphas = alloc::vec![1e-4, 1e-2, 1.0, 10.0, 100.0];
            let a = grid_search(RegressorKind::Ridge, &HyperGrid::new(3).with("alpha", &alphas), &d, seed).unwrap();
            alphas.rotate_left(rot);
            let b = grid_search(RegressorKind::Ridge, &HyperGrid::new(3).with("alpha", &alphas), &d, seed).unwrap();
            proptest::prop_assert_eq!(a.hyperparams["alpha"], b.hyperparams["alpha"]);
        }
    }
}
