//! End-to-end runs of the `regpoison` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regpoison"))
        .args(args)
        .env_remove("REGPOISON_WARFARIN_CSV")
        .env_remove("REGPOISON_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// report.csv with the timing column removed.
fn report_without_timing(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let skip = headers.iter().position(|h| h == "wall_ms").expect("wall_ms column");
    let mut rows = vec![headers.iter().map(String::from).collect::<Vec<_>>()];
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows.push(rec.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v.to_string()).collect());
    }
    rows.iter_mut().for_each(|r| {
        if r.len() > skip && r[skip] == "wall_ms" {
            r.remove(skip);
        }
    });
    rows
}

const SMALL_CONFIG: &str = r#"{
  "datasets": [
    {"synthetic": {"name": "lin", "kind": "linear", "n": 240, "d": 3, "noise": 0.2, "seed": 1}},
    {"synthetic": {"name": "fri", "kind": "friedman", "n": 240, "d": 5, "noise": 0.2, "seed": 2}}
  ],
  "regressors": ["ridge", "lasso", {"kind": "kernelridge", "grid": {"alpha": [0.01], "gamma": [1]}}],
  "epsilons": [0, 0.04, 0.08],
  "attacks": ["flip", "statp"],
  "defenses": ["none", "trim", "itrim"],
  "variants": [{"name": "itrim_fine", "epsilons": [0.04], "itrim": {"epsilon_max": 0.1, "runs": 6}}],
  "seed": 9
}"#;

#[test]
fn file_pipeline_from_synthetic_csv_to_evaluation() {
    let dir = TempDir::new().unwrap();
    ok(&["synth", "--kind", "linear", "--n", "400", "--d", "4", "--seed", "3", "--out", &p(&dir, "raw.csv")]);
    let prep = ok(&[
        "prepare",
        "--input",
        &p(&dir, "raw.csv"),
        "--target",
        "y",
        "--out-dir",
        &p(&dir, "split"),
        "--seed",
        "3",
    ]);
    assert!(prep.contains("substitute 100 / train 240 / test 60"), "{prep}");
    for f in ["substitute.csv", "train.csv", "test.csv", "train.meta.json"] {
        assert!(dir.path().join("split").join(f).is_file(), "{f}");
    }

    let out = ok(&[
        "poison",
        "--attack",
        "flip",
        "--epsilon",
        "0.07",
        "--substitute",
        &p(&dir, "split/substitute.csv"),
        "--train-size",
        "250",
        "--out",
        &p(&dir, "poison.csv"),
    ]);
    assert!(out.contains("wrote 18 poison rows"), "{out}");
    let out = ok(&[
        "poison",
        "--attack",
        "statp",
        "--epsilon",
        "0.05",
        "--substitute",
        &p(&dir, "split/substitute.csv"),
        "--train-size",
        "250",
        "--out",
        &p(&dir, "statp.csv"),
    ]);
    assert!(out.contains("wrote 13 poison rows"), "{out}");

    let out = ok(&[
        "inject",
        "--train",
        &p(&dir, "split/train.csv"),
        "--poison",
        &p(&dir, "poison.csv"),
        "--out",
        &p(&dir, "poisoned.csv"),
        "--seed",
        "4",
    ]);
    assert!(out.contains("wrote 258 rows (18 poison)"), "{out}");

    let out = ok(&[
        "defend",
        "--defense",
        "itrim",
        "--input",
        &p(&dir, "poisoned.csv"),
        "--regressor",
        "ridge",
        "--epsilon-max",
        "0.1",
        "--runs",
        "6",
        "--out",
        &p(&dir, "defense.json"),
        "--retained-out",
        &p(&dir, "kept.csv"),
    ]);
    assert!(out.contains("poison rows removed: 18 of 18"), "{out}");
    let res: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("defense.json")).unwrap()).unwrap();
    assert!(res["estimated_epsilon"].as_f64().unwrap() >= 0.06);

    ok(&[
        "train",
        "--input",
        &p(&dir, "kept.csv"),
        "--regressor",
        "ridge",
        "--grid-search",
        "--out",
        &p(&dir, "model.json"),
    ]);
    let eval = ok(&[
        "evaluate",
        "--model",
        &p(&dir, "model.json"),
        "--input",
        &p(&dir, "split/test.csv"),
        "--out",
        &p(&dir, "eval.json"),
    ]);
    let m: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(m["n_test"], 60);
    assert!(m["mse"].as_f64().unwrap() < 0.01);
}

#[test]
fn experiment_is_deterministic_and_thread_count_independent() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("cfg.json"), SMALL_CONFIG).unwrap();
    let cfg = p(&dir, "cfg.json");
    ok(&["experiment", "--config", &cfg, "--out", &p(&dir, "a"), "--workers", "1"]);
    ok(&["experiment", "--config", &cfg, "--out", &p(&dir, "b"), "--workers", "1"]);
    let out = ok(&["experiment", "--config", &cfg, "--out", &p(&dir, "c"), "--workers", "3"]);
    // per dataset and regressor: 3 clean rows, 12 poisoned rows, 2 variant rows at eps 0.04
    assert!(out.contains("102 rows (0 failed)"), "{out}");

    let a = report_without_timing(&dir.path().join("a/report.csv"));
    assert_eq!(a, report_without_timing(&dir.path().join("b/report.csv")));
    assert_eq!(a, report_without_timing(&dir.path().join("c/report.csv")));
    for cell in ["lin__ridge__flip__eps0.0400__itrim_fine.json", "fri__lasso__statp__eps0.0800__trim.json"] {
        let x = std::fs::read(dir.path().join("a/cells").join(cell)).unwrap();
        assert_eq!(x, std::fs::read(dir.path().join("c/cells").join(cell)).unwrap(), "{cell}");
    }
    for fig in ["attack_curve.csv", "defense_curve.csv", "kink_trace.csv"] {
        assert!(dir.path().join("a/figures").join(fig).is_file(), "{fig}");
    }

    // figures can be rebuilt from the saved report alone
    ok(&["report", "--input", &p(&dir, "a/report.csv"), "--out", &p(&dir, "refig")]);
    assert_eq!(
        std::fs::read(dir.path().join("refig/attack_curve.csv")).unwrap(),
        std::fs::read(dir.path().join("a/figures/attack_curve.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    // a missing dataset fails its cells but not the run
    let cfg = r#"{"datasets": [{"path": "does/not/exist.csv", "target": "y"},
                               {"synthetic": {"name": "lin", "kind": "linear", "n": 200, "d": 2, "noise": 0.2, "seed": 1}}],
                  "regressors": ["ridge"], "epsilons": [0, 0.04], "defenses": ["none"]}"#;
    std::fs::write(dir.path().join("partial.json"), cfg).unwrap();
    let out = run(&["experiment", "--config", &p(&dir, "partial.json"), "--out", &p(&dir, "partial")]);
    assert_eq!(out.status.code(), Some(2));
    let rows = report_without_timing(&dir.path().join("partial/report.csv"));
    let status = rows[0].iter().position(|h| h == "status").unwrap();
    assert_eq!(rows[1..].iter().filter(|r| r[status] == "failed").count(), 2);
    assert_eq!(rows[1..].iter().filter(|r| r[status] == "done").count(), 2);

    std::fs::write(dir.path().join("bad.json"), r#"{"datasets": [], "seed": 1}"#).unwrap();
    assert_eq!(run(&["experiment", "--config", &p(&dir, "bad.json"), "--out", &p(&dir, "bad")]).status.code(), Some(1));
    assert_eq!(
        run(&["train", "--input", &p(&dir, "missing.csv"), "--regressor", "ridge", "--out", &p(&dir, "m.json")])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["poison", "--attack", "flip"]).status.code(), Some(2), "clap usage errors exit with 2");

    let skipped = ok(&["warfarin", "--out", &p(&dir, "w")]);
    assert!(skipped.contains("skipped"), "{skipped}");
}
