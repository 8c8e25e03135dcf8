//! Experiment configuration, read from a single JSON file.
//!
//! ```json
//! {
//!   "datasets": [{"path": "data/wine.csv", "target": "quality"},
//!                {"synthetic": {"name": "lin5", "kind": "linear", "n": 2000, "d": 5, "noise": 0.3, "seed": 1}}],
//!   "regressors": ["ridge", {"kind": "mlp", "grid": {"hidden": [16], "epochs": [200]}}],
//!   "epsilons": [0, 0.02, 0.04],
//!   "attacks": ["flip"],
//!   "defenses": ["none", "itrim"],
//!   "variants": [{"name": "itrim_fine", "itrim": {"epsilon_max": 0.1, "runs": 6}}],
//!   "seed": 7
//! }
//! ```
//!
//! Every other field has a default; see [`ExperimentConfig`]. Variants add
//! further Trim or iTrim runs under their own names, next to the listed defenses.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use regpoison_core::defenses::{ITrimConfig, TrimConfig};
use regpoison_core::regressors::HyperGrid;
use regpoison_core::synthetic::SyntheticSpec;
use regpoison_core::{FeasibilityDomain, RegressorKind, RegressorSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Synthetic {
        synthetic: SyntheticSpec,
    },
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Csv { name: Some(n), .. } => n.clone(),
            DatasetSource::Csv { path, .. } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
            }
            DatasetSource::Synthetic { synthetic } => synthetic.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    /// Clean baseline; used for `ε = 0` regardless of the configured attacks.
    None,
    Flip,
    Statp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefenseKind {
    None,
    Trim,
    Itrim,
}

macro_rules! named_enum {
    ($t:ty { $($v:ident => $s:literal),+ }) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
            pub fn index(self) -> u64 {
                self as u64
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    other => Err(format!("unknown {}: '{other}'", stringify!($t))),
                }
            }
        }
    };
}

named_enum!(AttackKind { None => "none", Flip => "flip", Statp => "statp" });
named_enum!(DefenseKind { None => "none", Trim => "trim", Itrim => "itrim" });

/// An extra defense run with its own settings, reported under `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseVariant {
    pub name: String,
    /// Poisoning rates to run at; all configured rates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(flatten)]
    pub method: VariantMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantMethod {
    Trim { trim: TrimConfig },
    Itrim { itrim: ITrimConfig },
}

/// Most variants a config may carry; each needs its own seed field value.
pub const MAX_VARIANTS: usize = 200;

/// A regressor entry: either a bare kind name or an object with an optional grid
/// (replacing the default grid) and fixed hyperparameters applied to every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegressorEntry {
    Kind(RegressorKind),
    Detailed {
        kind: RegressorKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<BTreeMap<String, Vec<f64>>>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        fixed: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        folds: Option<usize>,
    },
}

impl DefenseVariant {
    pub fn applies_at(&self, epsilon: f64) -> bool {
        self.epsilons.as_ref().is_none_or(|e| e.contains(&epsilon))
    }
}

impl RegressorEntry {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorEntry::Kind(k) | RegressorEntry::Detailed { kind: k, .. } => *k,
        }
    }

    /// Search grid; fixed values become single-point axes.
    pub fn grid(&self) -> HyperGrid {
        match self {
            RegressorEntry::Kind(k) => HyperGrid::default_for(*k),
            RegressorEntry::Detailed { kind, grid, fixed, folds } => {
                let mut g = match grid {
                    Some(axes) => {
                        let mut g = HyperGrid::new(folds.unwrap_or(3));
                        g.params = axes.clone();
                        g
                    }
                    None => HyperGrid::default_for(*kind),
                };
                if let Some(f) = folds {
                    g.folds = *f;
                }
                for (k, v) in fixed {
                    g.params.insert(k.clone(), vec![*v]);
                }
                g
            }
        }
    }
}

fn default_cap() -> usize {
    10_000
}
fn default_epsilons() -> Vec<f64> {
    vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.10]
}
fn default_attacks() -> Vec<AttackKind> {
    vec![AttackKind::Flip]
}
fn default_defenses() -> Vec<DefenseKind> {
    vec![DefenseKind::None, DefenseKind::Trim, DefenseKind::Itrim]
}
fn default_regressors() -> Vec<RegressorEntry> {
    RegressorKind::ALL.iter().map(|&k| RegressorEntry::Kind(k)).collect()
}
fn default_surrogate() -> RegressorSpec {
    RegressorSpec::new(RegressorKind::KernelRidge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_cap")]
    pub subsample_cap: usize,
    #[serde(default = "default_regressors")]
    pub regressors: Vec<RegressorEntry>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_attacks")]
    pub attacks: Vec<AttackKind>,
    #[serde(default = "default_defenses")]
    pub defenses: Vec<DefenseKind>,
    /// Trim settings; `epsilon_hat` defaults to 0.14.
    #[serde(default)]
    pub trim: TrimConfig,
    #[serde(default)]
    pub itrim: ITrimConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<DefenseVariant>,
    /// Model StatP queries, fitted on the substitute set.
    #[serde(default = "default_surrogate")]
    pub statp_surrogate: RegressorSpec,
    #[serde(default)]
    pub domain: FeasibilityDomain,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` defers to the environment or the machine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// A config over `datasets` with every other field at its default.
    pub fn new(datasets: Vec<DatasetSource>) -> Self {
        ExperimentConfig {
            datasets,
            subsample_cap: default_cap(),
            regressors: default_regressors(),
            epsilons: default_epsilons(),
            attacks: default_attacks(),
            defenses: default_defenses(),
            trim: TrimConfig::default(),
            itrim: ITrimConfig::default(),
            variants: Vec::new(),
            statp_surrogate: default_surrogate(),
            domain: FeasibilityDomain::default(),
            seed: 0,
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if self.regressors.is_empty() || self.epsilons.is_empty() || self.attacks.is_empty() || self.defenses.is_empty()
        {
            return bad("regressors, epsilons, attacks and defenses must be nonempty".into());
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return bad("epsilons must be strictly ascending".into());
        }
        if self.epsilons.iter().any(|e| !(0.0..1.0).contains(e)) {
            return bad("epsilons must lie in [0, 1)".into());
        }
        if self.attacks.contains(&AttackKind::None) {
            return bad("'none' is implied by epsilon 0 and cannot be listed as an attack".into());
        }
        if self.subsample_cap < 10 {
            return bad("subsample_cap must be at least 10".into());
        }
        let mut names: Vec<String> = self.datasets.iter().map(DatasetSource::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        let mut kinds: Vec<RegressorKind> = self.regressors.iter().map(RegressorEntry::kind).collect();
        kinds.sort();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            return bad("each regressor kind may appear once".into());
        }
        for r in &self.regressors {
            r.grid().validate().or_else(|e| bad(format!("{}: {e}", r.kind())))?;
        }
        if self.defenses.contains(&DefenseKind::Trim) {
            self.trim.validate().or_else(|e| bad(format!("trim: {e}")))?;
        }
        if self.defenses.contains(&DefenseKind::Itrim) {
            self.itrim.validate().or_else(|e| bad(format!("itrim: {e}")))?;
        }
        if self.variants.len() > MAX_VARIANTS {
            return bad(format!("at most {MAX_VARIANTS} defense variants"));
        }
        let mut seen: Vec<&str> = vec!["none", "trim", "itrim"];
        for v in &self.variants {
            if v.name.is_empty() || seen.contains(&v.name.as_str()) {
                return bad(format!("defense variant name '{}' is empty or already taken", v.name));
            }
            seen.push(&v.name);
            if let Some(eps) = &v.epsilons {
                if eps.iter().any(|e| !self.epsilons.contains(e)) {
                    return bad(format!("{}: every variant epsilon must be one of the configured epsilons", v.name));
                }
            }
            match &v.method {
                VariantMethod::Trim { trim } => trim.validate(),
                VariantMethod::Itrim { itrim } => itrim.validate(),
            }
            .or_else(|e| bad(format!("{}: {e}", v.name)))?;
        }
        self.domain.validate().or_else(|e| bad(format!("domain: {e}")))?;
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }
}
