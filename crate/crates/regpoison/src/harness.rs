//! The experiment grid: poison, grid-search, fit, defend and evaluate every
//! (dataset, ε, attack, regressor, defense) combination.
//!
//! Work is split into two parallel phases. The first builds one poisoned training
//! set per (dataset, ε, attack); the second runs one job per regressor on top of
//! it, producing a report row for every configured defense. Each job draws its
//! randomness from seeds derived from the cell coordinates, so results do not
//! depend on scheduling or on the worker count.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use regpoison_core::attacks::{flip_attack, statp_with_surrogate, AttackConfig};
use regpoison_core::defenses::{itrim, trim, DefenseResult, ITrimConfig, StopReason, TrimConfig};
use regpoison_core::rng::mix64;
use regpoison_core::synthetic::generate;
use regpoison_core::{
    append_and_shuffle, apply_scaler, fit, fit_scaler, grid_search, predict, split, subsample, DataSplits, Dataset,
    FittedModel, MetricsReport, PoisonSet, PoisonedDataset, RawDataset, RegressorSpec, ScalingParams,
};
use serde::{Deserialize, Serialize};

use crate::config::{AttackKind, DatasetSource, DefenseKind, ExperimentConfig, VariantMethod};
use crate::error::{HarnessError, Result};
use crate::io::load_csv;

/// Environment variable consulted for the worker count when the config leaves it unset.
pub const WORKERS_ENV: &str = "REGPOISON_WORKERS";

/// Which random stream of a cell a seed feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Subsample = 0,
    Split = 1,
    Attack = 2,
    Shuffle = 3,
    Model = 4,
    Defense = 5,
}

/// Position of a cell in the experiment grid. Indices refer to the config lists
/// (attacks and fixed defenses by their enum index, defense variants after them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CellCoords {
    pub dataset: usize,
    pub epsilon: usize,
    pub regressor: usize,
    pub attack: u64,
    pub defense: u64,
}

/// Seed for one stage of one cell.
///
/// The coordinates are packed into disjoint bit fields (20 bits of dataset index,
/// 16 of ε index, 8 each for regressor, attack and defense, 4 for the stage), then
/// combined with the master seed through bijections only, so distinct coordinates
/// never share a seed.
pub fn cell_seed(master: u64, c: CellCoords, stage: Stage) -> u64 {
    debug_assert!(c.dataset < 1 << 20 && c.epsilon < 1 << 16 && c.regressor < 1 << 8);
    let packed = (c.dataset as u64) << 44
        | (c.epsilon as u64) << 28
        | (c.regressor as u64) << 20
        | c.attack << 12
        | c.defense << 4
        | stage as u64;
    mix64(packed ^ mix64(master))
}

/// A dataset after subsampling, scaling and splitting.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    pub column_names: Vec<String>,
    pub scaling: Arc<ScalingParams>,
    pub splits: DataSplits,
    pub rows_dropped: usize,
}

pub fn load_source(source: &DatasetSource) -> Result<(RawDataset, usize)> {
    match source {
        DatasetSource::Csv { path, target, name } => {
            let (mut raw, report) = load_csv(path, target)?;
            if let Some(n) = name {
                raw.name = n.clone();
            }
            Ok((raw, report.rows_dropped))
        }
        DatasetSource::Synthetic { synthetic } => Ok((generate(synthetic)?, 0)),
    }
}

/// Subsamples to `cap` rows, fits the scaler on the result and splits it.
pub fn prepare_raw(raw: &RawDataset, cap: usize, master: u64, dataset_index: usize) -> Result<PreparedDataset> {
    let coords = CellCoords { dataset: dataset_index, ..Default::default() };
    let raw = subsample(raw, cap, cell_seed(master, coords, Stage::Subsample));
    let scaling = Arc::new(fit_scaler(&raw));
    let scaled = apply_scaler(&raw, &scaling)?;
    let splits = split(&scaled, cell_seed(master, coords, Stage::Split))?;
    Ok(PreparedDataset {
        name: raw.name.clone(),
        column_names: raw.column_names.clone(),
        scaling,
        splits,
        rows_dropped: 0,
    })
}

/// Builds the attacker's poison set for one (dataset, ε, attack) cell.
pub fn make_poison(
    prepared: &PreparedDataset,
    attack: AttackKind,
    epsilon: f64,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<PoisonSet> {
    let d = prepared.splits.train.d();
    if attack == AttackKind::None || epsilon == 0.0 {
        return Ok(PoisonSet {
            features: regpoison_core::Matrix::zeros(0, d),
            targets: vec![],
            source_indices: vec![],
        });
    }
    let mut ac = AttackConfig::new(epsilon, prepared.splits.train.n(), seed);
    ac.domain = config.domain;
    let sub = &prepared.splits.substitute;
    Ok(match attack {
        AttackKind::Flip => flip_attack(sub, &ac)?,
        AttackKind::Statp => statp_with_surrogate(sub, &ac, &config.statp_surrogate)?,
        AttackKind::None => unreachable!(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Done,
    Failed,
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub regressor: String,
    pub attack: String,
    pub epsilon: f64,
    pub defense: String,
    pub status: CellStatus,
    pub error: Option<String>,
    pub seed: u64,
    /// Hyperparameters chosen by grid search on the poisoned training set; defended
    /// refits reuse them.
    pub hyperparams: Option<String>,
    pub n_train: Option<usize>,
    pub n_poison: Option<usize>,
    pub n_test: Option<usize>,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub acceptable_rate_pct: Option<f64>,
    /// Ratios to the clean, undefended cell of the same dataset and regressor.
    pub mse_over_clean: Option<f64>,
    pub mae_over_clean: Option<f64>,
    pub train_loss: Option<f64>,
    pub retained: Option<usize>,
    pub estimated_epsilon: Option<f64>,
    pub no_kink_found: Option<bool>,
    pub stop_reason: Option<String>,
    /// Share of the injected rows the defense removed (evaluation only).
    pub poison_removed: Option<f64>,
    pub statp_oracle: Option<String>,
    pub wall_ms: u64,
}

impl ReportRow {
    fn blank(dataset: &str, regressor: &str, attack: AttackKind, epsilon: f64, defense: &str, seed: u64) -> Self {
        ReportRow {
            dataset: dataset.to_string(),
            regressor: regressor.to_string(),
            attack: attack.name().to_string(),
            epsilon,
            defense: defense.to_string(),
            status: CellStatus::Failed,
            error: None,
            seed,
            hyperparams: None,
            n_train: None,
            n_poison: None,
            n_test: None,
            mse: None,
            mae: None,
            acceptable_rate_pct: None,
            mse_over_clean: None,
            mae_over_clean: None,
            train_loss: None,
            retained: None,
            estimated_epsilon: None,
            no_kink_found: None,
            stop_reason: None,
            poison_removed: None,
            statp_oracle: None,
            wall_ms: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.status == CellStatus::Done
    }

    fn fail(mut self, e: impl std::fmt::Display) -> Self {
        self.status = CellStatus::Failed;
        self.error = Some(e.to_string());
        self
    }

    fn record(&mut self, m: &MetricsReport) {
        self.status = CellStatus::Done;
        self.mse = Some(m.mse);
        self.mae = Some(m.mae_original_units);
        self.acceptable_rate_pct = Some(m.acceptable_rate_pct);
        self.n_test = Some(m.n_test);
    }
}

/// A candidate of a defense's loss trace with the candidate model's test MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkPoint {
    pub epsilon_hat: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub retained: usize,
}

/// Per-cell audit of a defense run, written to `cells/*.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAudit {
    pub dataset: String,
    pub regressor: String,
    pub attack: String,
    pub epsilon: f64,
    pub defense: String,
    pub seed: u64,
    pub spec: RegressorSpec,
    pub estimated_epsilon: f64,
    pub no_kink_found: bool,
    pub stop_reason: StopReason,
    pub loss_trace: Vec<KinkPoint>,
    pub iteration_losses: Vec<f64>,
    pub retained_indices: Vec<usize>,
    pub poison_removed: Option<f64>,
}

impl CellAudit {
    pub fn file_name(&self) -> String {
        format!("{}__{}__{}__eps{:.4}__{}.json", self.dataset, self.regressor, self.attack, self.epsilon, self.defense)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    pub audits: Vec<CellAudit>,
}

impl ExperimentOutput {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_done()).count()
    }

    /// The row for the given coordinates, if present.
    pub fn find(
        &self,
        dataset: &str,
        regressor: &str,
        attack: &str,
        epsilon: f64,
        defense: &str,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.dataset == dataset
                && r.regressor == regressor
                && r.attack == attack
                && r.defense == defense
                && (r.epsilon - epsilon).abs() < 1e-12
        })
    }
}

pub fn evaluate_model(model: &FittedModel, test: &Dataset) -> regpoison_core::Result<MetricsReport> {
    let pred = predict(model, &test.features)?;
    MetricsReport::evaluate(&test.targets, &pred, test.scaling.as_deref())
}

fn format_params(spec: &RegressorSpec) -> String {
    spec.hyperparams.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// Worker count: explicit value, else the environment variable, else rayon's default.
pub fn resolve_workers(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok()).filter(|&w| w > 0)
}

struct PoisonGroup {
    dataset: usize,
    epsilon: usize,
    attack: AttackKind,
    poisoned: std::result::Result<PoisonedDataset, String>,
}

#[derive(Clone, Copy)]
enum Method<'a> {
    None,
    Trim(&'a TrimConfig),
    Itrim(&'a ITrimConfig),
}

/// One defense column of the report: "none" first, then the listed defenses,
/// then the named variants. Variants take seed indices after the fixed kinds.
struct DefenseRun<'a> {
    name: String,
    index: u64,
    method: Method<'a>,
}

fn defense_runs(config: &ExperimentConfig, epsilon: f64) -> Vec<DefenseRun<'_>> {
    let mut kinds = vec![DefenseKind::None];
    for &d in &config.defenses {
        if !kinds.contains(&d) {
            kinds.push(d);
        }
    }
    let mut out: Vec<DefenseRun> = kinds
        .into_iter()
        .map(|d| DefenseRun {
            name: d.name().to_string(),
            index: d.index(),
            method: match d {
                DefenseKind::None => Method::None,
                DefenseKind::Trim => Method::Trim(&config.trim),
                DefenseKind::Itrim => Method::Itrim(&config.itrim),
            },
        })
        .collect();
    let first = DefenseKind::Itrim.index() + 1;
    for (i, v) in config.variants.iter().enumerate().filter(|(_, v)| v.applies_at(epsilon)) {
        out.push(DefenseRun {
            name: v.name.clone(),
            index: first + i as u64,
            method: match &v.method {
                VariantMethod::Trim { trim } => Method::Trim(trim),
                VariantMethod::Itrim { itrim } => Method::Itrim(itrim),
            },
        });
    }
    out
}

fn attacks_for(config: &ExperimentConfig, epsilon: f64) -> Vec<AttackKind> {
    if epsilon == 0.0 {
        vec![AttackKind::None]
    } else {
        config.attacks.clone()
    }
}

/// Runs the whole grid. Per-cell errors are recorded in the rows; only an invalid
/// config or a failed thread pool aborts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = resolve_workers(config.workers) {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| HarnessError::ConfigInvalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_in_pool(config)))
}

fn run_in_pool(config: &ExperimentConfig) -> ExperimentOutput {
    let master = config.seed;
    let prepared: Vec<std::result::Result<PreparedDataset, String>> = config
        .datasets
        .par_iter()
        .enumerate()
        .map(|(di, src)| {
            let (raw, dropped) = load_source(src).map_err(|e| e.to_string())?;
            let mut raw = raw;
            raw.name = src.name();
            let mut p = prepare_raw(&raw, config.subsample_cap, master, di).map_err(|e| e.to_string())?;
            p.rows_dropped = dropped;
            Ok(p)
        })
        .collect();

    let mut group_keys = Vec::new();
    for di in 0..config.datasets.len() {
        for (ei, &eps) in config.epsilons.iter().enumerate() {
            for attack in attacks_for(config, eps) {
                group_keys.push((di, ei, attack));
            }
        }
    }
    let groups: Vec<PoisonGroup> = group_keys
        .par_iter()
        .map(|&(di, ei, attack)| {
            let coords = CellCoords { dataset: di, epsilon: ei, attack: attack.index(), ..Default::default() };
            let poisoned = prepared[di].as_ref().map_err(Clone::clone).and_then(|p| {
                let eps = config.epsilons[ei];
                let poison = make_poison(p, attack, eps, config, cell_seed(master, coords, Stage::Attack))
                    .map_err(|e| e.to_string())?;
                append_and_shuffle(&p.splits.train, &poison, cell_seed(master, coords, Stage::Shuffle))
                    .map_err(|e| e.to_string())
            });
            PoisonGroup { dataset: di, epsilon: ei, attack, poisoned }
        })
        .collect();

    let jobs: Vec<(usize, usize)> =
        (0..groups.len()).flat_map(|g| (0..config.regressors.len()).map(move |r| (g, r))).collect();
    let results: Vec<(Vec<ReportRow>, Vec<CellAudit>)> = jobs
        .par_iter()
        .map(|&(g, ri)| {
            let group = &groups[g];
            let test = prepared[group.dataset].as_ref().ok().map(|p| &p.splits.test);
            run_job(config, group, ri, test)
        })
        .collect();

    let mut out = ExperimentOutput::default();
    for (rows, audits) in results {
        out.rows.extend(rows);
        out.audits.extend(audits);
    }
    attach_clean_ratios(&mut out.rows);
    out
}

fn run_job(
    config: &ExperimentConfig,
    group: &PoisonGroup,
    ri: usize,
    test: Option<&Dataset>,
) -> (Vec<ReportRow>, Vec<CellAudit>) {
    let entry = &config.regressors[ri];
    let kind = entry.kind();
    let dataset = config.datasets[group.dataset].name();
    let eps = config.epsilons[group.epsilon];
    let base = CellCoords {
        dataset: group.dataset,
        epsilon: group.epsilon,
        regressor: ri,
        attack: group.attack.index(),
        defense: 0,
    };
    let defenses = defense_runs(config, eps);
    let blank = |d: &DefenseRun| {
        let coords = CellCoords { defense: d.index, ..base };
        let stage = if matches!(d.method, Method::None) { Stage::Model } else { Stage::Defense };
        let mut row =
            ReportRow::blank(&dataset, kind.name(), group.attack, eps, &d.name, cell_seed(config.seed, coords, stage));
        if group.attack == AttackKind::Statp {
            row.statp_oracle = Some(format!("surrogate:{}", config.statp_surrogate.kind));
        }
        row
    };

    let (poisoned, test) = match (&group.poisoned, test) {
        (Ok(p), Some(t)) => (p, t),
        (Err(e), _) => return (defenses.iter().map(|d| blank(d).fail(e)).collect(), vec![]),
        (Ok(_), None) => return (defenses.iter().map(|d| blank(d).fail("dataset unavailable")).collect(), vec![]),
    };

    let started = Instant::now();
    let model_seed = cell_seed(config.seed, base, Stage::Model);
    let searched = grid_search(kind, &entry.grid(), &poisoned.data, model_seed);
    let spec = match searched {
        Ok(s) => s,
        Err(e) => return (defenses.iter().map(|d| blank(d).fail(format!("grid search: {e}"))).collect(), vec![]),
    };
    let params = format_params(&spec);
    let n_train = poisoned.data.n();
    let n_poison = poisoned.poison_count();

    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for d in &defenses {
        let mut row = blank(d);
        row.hyperparams = Some(params.clone());
        row.n_train = Some(n_train);
        row.n_poison = Some(n_poison);
        let t0 = Instant::now();
        let outcome: regpoison_core::Result<Option<DefenseResult>> = match d.method {
            Method::None => fit(&spec, &poisoned.data).and_then(|m| {
                let metrics = evaluate_model(&m, test)?;
                row.record(&metrics);
                row.train_loss = Some(m.training_loss);
                Ok(None)
            }),
            Method::Trim(cfg) => trim(&poisoned.data, &spec, cfg, row.seed).map(Some),
            Method::Itrim(cfg) => itrim(&poisoned.data, &spec, cfg, row.seed).map(Some),
        };
        match outcome {
            Err(e) => row = row.fail(e),
            Ok(None) => {}
            Ok(Some(res)) => match evaluate_model(&res.final_model, test) {
                Err(e) => row = row.fail(e),
                Ok(metrics) => {
                    row.record(&metrics);
                    row.train_loss = Some(res.train_loss());
                    row.retained = Some(res.retained_indices.len());
                    row.estimated_epsilon = Some(res.estimated_epsilon);
                    row.no_kink_found = matches!(d.method, Method::Itrim(_)).then_some(res.no_kink_found);
                    row.stop_reason = Some(format!("{:?}", res.stop_reason).to_lowercase());
                    row.poison_removed = poisoned.poison_removed_fraction(&res.retained_indices);
                    audits.push(audit_for(&row, &spec, &res, test));
                }
            },
        }
        row.wall_ms = t0.elapsed().as_millis() as u64;
        if matches!(d.method, Method::None) {
            row.wall_ms = started.elapsed().as_millis() as u64;
        }
        rows.push(row);
    }
    (rows, audits)
}

fn audit_for(row: &ReportRow, spec: &RegressorSpec, res: &DefenseResult, test: &Dataset) -> CellAudit {
    let models: Vec<&FittedModel> =
        if res.candidate_models.is_empty() { vec![&res.final_model] } else { res.candidate_models.iter().collect() };
    let loss_trace = res
        .loss_trace
        .iter()
        .zip(models)
        .map(|(tp, m)| KinkPoint {
            epsilon_hat: tp.epsilon_hat,
            train_loss: tp.train_loss,
            test_loss: evaluate_model(m, test).ok().map(|r| r.mse),
            retained: tp.retained,
        })
        .collect();
    CellAudit {
        dataset: row.dataset.clone(),
        regressor: row.regressor.clone(),
        attack: row.attack.clone(),
        epsilon: row.epsilon,
        defense: row.defense.clone(),
        seed: row.seed,
        spec: spec.clone(),
        estimated_epsilon: res.estimated_epsilon,
        no_kink_found: res.no_kink_found,
        stop_reason: res.stop_reason,
        loss_trace,
        iteration_losses: res.iteration_losses.clone(),
        retained_indices: res.retained_indices.clone(),
        poison_removed: row.poison_removed,
    }
}

/// Fills `*_over_clean` from the ε = 0, undefended row of each (dataset, regressor).
pub fn attach_clean_ratios(rows: &mut [ReportRow]) {
    let clean: Vec<(String, String, f64, f64)> = rows
        .iter()
        .filter(|r| r.is_done() && r.epsilon == 0.0 && r.defense == "none")
        .filter_map(|r| Some((r.dataset.clone(), r.regressor.clone(), r.mse?, r.mae?)))
        .collect();
    for row in rows.iter_mut().filter(|r| r.is_done()) {
        if let Some((_, _, mse, mae)) = clean.iter().find(|c| c.0 == row.dataset && c.1 == row.regressor) {
            row.mse_over_clean = row.mse.filter(|_| *mse > 0.0).map(|v| v / mse);
            row.mae_over_clean = row.mae.filter(|_| *mae > 0.0).map(|v| v / mae);
        }
    }
}
