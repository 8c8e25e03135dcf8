use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use regpoison::config::{AttackKind, DefenseKind, ExperimentConfig};
use regpoison::figures::{read_audits, read_report, write_csv, write_figures, write_outputs};
use regpoison::harness::{evaluate_model, prepare_raw, run_experiment};
use regpoison::io::{load_csv, read_dataset, read_json, write_dataset, write_json, DatasetMeta};
use regpoison::warfarin::{warfarin_scenario, DEFAULT_TARGET};
use regpoison::HarnessError;
use regpoison_core::attacks::{default_surrogate, flip_attack, statp_attack, statp_with_surrogate, AttackConfig};
use regpoison_core::defenses::{itrim, trim, ITrimConfig, TrimConfig};
use regpoison_core::regressors::HyperGrid;
use regpoison_core::synthetic::{generate, SyntheticKind, SyntheticSpec};
use regpoison_core::{
    append_and_shuffle, fit, grid_search, predict, Dataset, FittedModel, PoisonSet, RegressorKind, RegressorSpec,
};

/// Black-box poisoning attacks and trimmed-loss defenses for regression.
#[derive(Parser)]
#[command(name = "regpoison", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression CSV (original units).
    Synth(SynthArgs),
    /// Subsample, scale and split a raw CSV into substitute/train/test files.
    Prepare(PrepareArgs),
    /// Craft a poison set from a substitute dataset.
    Poison(PoisonArgs),
    /// Append a poison set to a training set and shuffle.
    Inject(InjectArgs),
    /// Run Trim or iTrim on a (possibly poisoned) training set.
    Defend(DefendArgs),
    /// Fit a regressor, optionally choosing hyperparameters by grid search.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Run a full experiment grid from a JSON config.
    Experiment(ExperimentArgs),
    /// Re-derive the figure series from an existing report.csv.
    Report(ReportArgs),
    /// Clean / poisoned / defended comparison on a warfarin dosing CSV.
    Warfarin(WarfarinArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Piecewise,
    Friedman,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = regpoison_core::synthetic::DEFAULT_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target column name or zero-based index.
    #[arg(long)]
    target: String,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PoisonArgs {
    #[arg(long)]
    attack: AttackKind,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    substitute: PathBuf,
    /// Size of the victim's clean training set.
    #[arg(long)]
    train_size: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// StatP: query this saved model instead of a surrogate fitted on the substitute set.
    #[arg(long)]
    model: Option<PathBuf>,
    /// StatP: surrogate kind when no model is given.
    #[arg(long, default_value = "kernelridge")]
    surrogate: RegressorKind,
    #[arg(long, default_value_t = 0.0)]
    gamma_min: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_max: f64,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    poison: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    regressor: RegressorKind,
    /// Hyperparameter override, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Choose hyperparameters by cross-validated grid search over the default grid
    /// (params then act as fixed values).
    #[arg(long)]
    grid_search: bool,
    #[arg(long, default_value_t = 3)]
    folds: usize,
}

#[derive(Args)]
struct DefendArgs {
    #[arg(long)]
    defense: DefenseKind,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.14)]
    epsilon_hat: f64,
    #[arg(long, default_value_t = 0.14)]
    epsilon_max: f64,
    #[arg(long, default_value_t = 6)]
    runs: usize,
    #[arg(long, default_value_t = 0.001)]
    threshold: f64,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    /// iTrim: evaluate every candidate even after the kink.
    #[arg(long)]
    full_trace: bool,
    /// Result JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the retained rows as a dataset file.
    #[arg(long)]
    retained_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (overrides the config and REGPOISON_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// An existing report.csv.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the figure series.
    #[arg(long)]
    out: PathBuf,
    /// Directory of per-cell audits; defaults to `cells/` next to the report.
    #[arg(long)]
    cells: Option<PathBuf>,
}

#[derive(Args)]
struct WarfarinArgs {
    /// Dosing CSV; defaults to $REGPOISON_WARFARIN_CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_TARGET)]
    target: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn resolve_spec(args: &ModelArgs, data: &Dataset, seed: u64) -> anyhow::Result<RegressorSpec> {
    if args.grid_search {
        let mut grid = HyperGrid::default_for(args.regressor);
        grid.folds = args.folds;
        for (k, v) in &args.params {
            grid.params.insert(k.clone(), vec![*v]);
        }
        return Ok(grid_search(args.regressor, &grid, data, seed)?);
    }
    let mut spec = RegressorSpec::new(args.regressor).with_seed(seed);
    for (k, v) in &args.params {
        spec = spec.with(k, *v);
    }
    Ok(spec)
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let kind = match a.kind {
        KindArg::Linear => SyntheticKind::Linear,
        KindArg::Piecewise => SyntheticKind::Piecewise,
        KindArg::Friedman => SyntheticKind::Friedman,
    };
    let mut spec = SyntheticSpec::new(kind, a.n, a.d, a.seed);
    spec.noise = a.noise;
    let raw = generate(&spec)?;
    let ds = Dataset::new(raw.features, raw.targets)?;
    let meta = DatasetMeta { seed: Some(a.seed), note: Some(format!("synthetic {}", spec.name)), ..Default::default() };
    write_dataset(&a.out, &ds, Some(&raw.column_names), &meta)?;
    println!("wrote {} rows to {}", ds.n(), a.out.display());
    Ok(())
}

fn prepare(a: PrepareArgs) -> anyhow::Result<()> {
    let (raw, report) = load_csv(&a.input, &a.target)?;
    if report.rows_dropped > 0 {
        eprintln!("dropped {} of {} rows with missing or non-numeric cells", report.rows_dropped, report.rows_read);
    }
    if !report.ignored_columns.is_empty() {
        eprintln!("ignored non-numeric columns: {}", report.ignored_columns.join(", "));
    }
    let p = prepare_raw(&raw, a.cap, a.seed, 0)?;
    let s = &p.splits;
    for (role, data, idx) in [
        ("substitute", &s.substitute, &s.substitute_indices),
        ("train", &s.train, &s.train_indices),
        ("test", &s.test, &s.test_indices),
    ] {
        let meta = DatasetMeta {
            role: Some(role.into()),
            scaling: Some((*p.scaling).clone()),
            seed: Some(a.seed),
            indices: Some(idx.clone()),
            ..Default::default()
        };
        write_dataset(&a.out_dir.join(format!("{role}.csv")), data, Some(&p.column_names), &meta)?;
    }
    println!(
        "substitute {} / train {} / test {} rows in {}",
        s.substitute.n(),
        s.train.n(),
        s.test.n(),
        a.out_dir.display()
    );
    Ok(())
}

fn poison(a: PoisonArgs) -> anyhow::Result<()> {
    let (sub, names, meta) = read_dataset(&a.substitute)?;
    let mut cfg = AttackConfig::new(a.epsilon, a.train_size, a.seed);
    cfg.domain = regpoison_core::FeasibilityDomain::new(a.gamma_min, a.gamma_max)?;
    let (set, oracle): (PoisonSet, Option<String>) = match a.attack {
        AttackKind::Flip => (flip_attack(&sub, &cfg)?, None),
        AttackKind::Statp => match &a.model {
            Some(path) => {
                let model: FittedModel = read_json(path)?;
                (statp_attack(&sub, &cfg, |q| predict(&model, q))?, Some(format!("model:{}", path.display())))
            }
            None => {
                let spec = if a.surrogate == RegressorKind::KernelRidge {
                    default_surrogate()
                } else {
                    RegressorSpec::new(a.surrogate)
                };
                (statp_with_surrogate(&sub, &cfg, &spec)?, Some(format!("surrogate:{}", a.surrogate)))
            }
        },
        AttackKind::None => bail!("attack must be flip or statp"),
    };
    let data = Dataset::new(set.features.clone(), set.targets.clone())?;
    let out_meta = DatasetMeta {
        role: Some("poison".into()),
        scaling: meta.scaling,
        seed: Some(a.seed),
        provenance: Some(vec![true; set.size()]),
        source_indices: (!set.source_indices.is_empty()).then(|| set.source_indices.clone()),
        note: Some(format!(
            "{} epsilon={} train_size={}{}",
            a.attack,
            a.epsilon,
            a.train_size,
            oracle.map(|o| format!(" oracle={o}")).unwrap_or_default()
        )),
        ..Default::default()
    };
    write_dataset(&a.out, &data, Some(&names), &out_meta)?;
    println!("wrote {} poison rows to {}", set.size(), a.out.display());
    Ok(())
}

fn inject(a: InjectArgs) -> anyhow::Result<()> {
    let (train, names, meta) = read_dataset(&a.train)?;
    let (p, _, pmeta) = read_dataset(&a.poison)?;
    let set = PoisonSet {
        features: p.features,
        targets: p.targets,
        source_indices: pmeta.source_indices.unwrap_or_default(),
    };
    let poisoned = append_and_shuffle(&train, &set, a.seed)?;
    let out_meta = DatasetMeta {
        role: Some("poisoned_train".into()),
        scaling: meta.scaling,
        seed: Some(a.seed),
        provenance: Some(poisoned.provenance.clone()),
        ..Default::default()
    };
    write_dataset(&a.out, &poisoned.data, Some(&names), &out_meta)?;
    println!("wrote {} rows ({} poison) to {}", poisoned.data.n(), poisoned.poison_count(), a.out.display());
    Ok(())
}

fn defend(a: DefendArgs) -> anyhow::Result<()> {
    let (data, names, meta) = read_dataset(&a.input)?;
    let spec = resolve_spec(&a.model, &data, a.seed)?;
    let trim_cfg = TrimConfig { epsilon_hat: a.epsilon_hat, max_iterations: a.max_iterations, ..TrimConfig::default() };
    let res = match a.defense {
        DefenseKind::Trim => trim(&data, &spec, &trim_cfg, a.seed)?,
        DefenseKind::Itrim => {
            let cfg = ITrimConfig {
                epsilon_max: a.epsilon_max,
                runs: a.runs,
                threshold: a.threshold,
                trim: trim_cfg,
                full_trace: a.full_trace,
            };
            itrim(&data, &spec, &cfg, a.seed)?
        }
        DefenseKind::None => bail!("defense must be trim or itrim"),
    };
    write_json(&a.out, &res)?;
    if let Some(path) = &a.retained_out {
        let kept = data.select(&res.retained_indices);
        let m = DatasetMeta {
            role: Some("defended_train".into()),
            scaling: meta.scaling,
            indices: Some(res.retained_indices.clone()),
            ..Default::default()
        };
        write_dataset(path, &kept, Some(&names), &m)?;
    }
    println!(
        "retained {} of {} rows, estimated epsilon {}{}",
        res.retained_indices.len(),
        data.n(),
        res.estimated_epsilon,
        if res.no_kink_found { " (no kink found)" } else { "" }
    );
    if let Some(prov) = &meta.provenance {
        let total = prov.iter().filter(|&&p| p).count();
        let kept = res.retained_indices.iter().filter(|&&i| prov[i]).count();
        println!("poison rows removed: {} of {total}", total - kept);
    }
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let (data, _, _) = read_dataset(&a.input)?;
    let spec = resolve_spec(&a.model, &data, a.seed)?;
    let model = fit(&spec, &data)?;
    write_json(&a.out, &model)?;
    println!(
        "{} training MSE {:.6}{}",
        spec.kind,
        model.training_loss,
        if model.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let model: FittedModel = read_json(&a.model)?;
    let (data, _, _) = read_dataset(&a.input)?;
    let report = evaluate_model(&model, &data)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.validate()?;
    let out = run_experiment(&cfg)?;
    let skipped = write_outputs(&a.out, &out)?;
    for (fig, why) in skipped {
        eprintln!("skipped {}: {why}", fig.file_name());
    }
    let failed = out.failed();
    println!("{} rows ({} failed) written to {}", out.rows.len(), failed, a.out.display());
    for r in out.rows.iter().filter(|r| !r.is_done()) {
        eprintln!(
            "failed: {} {} {} eps={} {}: {}",
            r.dataset,
            r.regressor,
            r.attack,
            r.epsilon,
            r.defense,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let rows = read_report(&a.input)?;
    let cells = a.cells.unwrap_or_else(|| a.input.parent().unwrap_or(Path::new(".")).join("cells"));
    let audits = read_audits(&cells)?;
    for (fig, why) in write_figures(&a.out, &rows, &audits)? {
        eprintln!("skipped {}: {why}", fig.file_name());
    }
    println!("figure series written to {}", a.out.display());
    Ok(())
}

fn warfarin(a: WarfarinArgs) -> anyhow::Result<()> {
    match warfarin_scenario(a.input.as_deref(), &a.target, a.seed) {
        Err(HarnessError::DatasetUnavailable(why)) => {
            println!("warfarin scenario skipped: {why}");
            Ok(())
        }
        Err(e) => Err(e.into()),
        Ok((table, rows)) => {
            write_csv(&a.out.join("warfarin_table.csv"), &table)?;
            write_csv(&a.out.join("report.csv"), &rows)?;
            for r in &table {
                println!(
                    "{:<12} MAE C {:.2} P {:.2} D {:.2}  P/C {:.2} D/C {:.2}",
                    r.regressor, r.mae_clean, r.mae_poisoned, r.mae_defended, r.mae_p_over_c, r.mae_d_over_c
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a).map(|_| ExitCode::SUCCESS),
        Command::Prepare(a) => prepare(a).map(|_| ExitCode::SUCCESS),
        Command::Poison(a) => poison(a).map(|_| ExitCode::SUCCESS),
        Command::Inject(a) => inject(a).map(|_| ExitCode::SUCCESS),
        Command::Defend(a) => defend(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => train(a).map(|_| ExitCode::SUCCESS),
        Command::Evaluate(a) => evaluate(a).map(|_| ExitCode::SUCCESS),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a).map(|_| ExitCode::SUCCESS),
        Command::Warfarin(a) => warfarin(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
