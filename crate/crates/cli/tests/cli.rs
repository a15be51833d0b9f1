// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use flsa_cli::commands::load_config;
use flsa_cli::document::{PathDocument, SegmentationDocument, TrendDocument};
use flsa_cli::input::digest;
use flsa_core::experiments::{example1_config, example2_config, sweep_config};
use serde_json::Value;
use tempfile::TempDir;

fn flsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flsa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn assert_schema(schema: &str, doc: &str) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let instance: Value = serde_json::from_str(doc).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn denoise_two_step_fixture() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "0\n0\n1\n1\n");
    let out = flsa(&["denoise", p(&input), "--lambda", "0.25", "--dual"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_schema("segmentation.schema.json", &body);
    let doc: SegmentationDocument = serde_json::from_str(&body).unwrap();
    assert_eq!(doc.change_points, vec![2]);
    assert_eq!(doc.signs, vec![1]);
    assert_eq!(doc.levels, vec![0.125, 0.875]);
    assert_eq!(doc.dual.as_deref(), Some(&[0.0, 0.125, 0.25, 0.125, 0.0][..]));
    assert!(doc.kkt.as_ref().unwrap().feasible);
    assert_eq!(doc.provenance.input_digest.as_deref(), Some(digest(b"0\n0\n1\n1\n").as_str()));
    assert_eq!(doc.segmentation().unwrap().expand(), vec![0.125, 0.125, 0.875, 0.875]);
}

#[test]
fn document_round_trips() {
    let dir = TempDir::new().unwrap();
    let values: Vec<String> = (0..60).map(|t| format!("{}", (t as f64 * 0.37).sin() / 3.0)).collect();
    let input = write(&dir, "y.csv", &values.join("\n"));
    let out = flsa(&["denoise", p(&input), "--lambda-frac", "0.1", "--dual"]);
    assert!(out.status.success());
    let body = stdout(&out);
    let doc: SegmentationDocument = serde_json::from_str(&body).unwrap();
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, body);
    assert_eq!(serde_json::from_str::<SegmentationDocument>(&again).unwrap(), doc);
}

#[test]
fn constant_input_is_one_segment() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "value\n2\n2\n2\n2\n2\n");
    for lambda in ["0", "0.5", "100"] {
        let out = flsa(&["denoise", p(&input), "--lambda", lambda]);
        let doc: SegmentationDocument = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(doc.change_points.is_empty());
        assert_eq!(doc.levels, vec![2.0]);
    }
}

#[test]
fn full_fraction_gives_the_mean() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1\n4\n2\n5\n");
    let out = flsa(&["denoise", p(&input), "--lambda-frac", "1.0"]);
    let doc: SegmentationDocument = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc.change_points.is_empty());
    assert_eq!(doc.levels, vec![3.0]);
}

#[test]
fn polish_and_csv_output() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "0\n0\n1\n1\n");
    let out = flsa(&["denoise", p(&input), "--lambda", "0.25", "--polish", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "fitted\n0\n0\n1\n1\n");
    let out = flsa(&["denoise", p(&input), "--lambda", "0.25", "--polish"]);
    let doc: SegmentationDocument = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc.polished);
    assert_eq!(doc.levels, vec![0.0, 1.0]);
}

#[test]
fn fitted_csv_feeds_back_as_input() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "0.1\n-0.3\n2.2\n1.9\n2.05\n");
    let fitted = dir.path().join("fitted.csv");
    let out = flsa(&["denoise", p(&input), "--lambda", "0.2", "--format", "csv", "-o", p(&fitted)]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let out = flsa(&["lambda-max", p(&fitted)]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn lambda_max_of_two_points() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1\n2\n");
    let out = flsa(&["lambda-max", p(&input)]);
    assert_eq!(stdout(&out), "0.5\n");
}

#[test]
fn reads_standard_input() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_flsa"))
        .args(["lambda-max", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0\n0\n1\n1\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(stdout(&out), "1\n");
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "y\n1\n2\nx\n");
    let out = flsa(&["denoise", p(&input), "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = flsa(&["denoise", p(&dir.path().join("missing.csv")), "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let input = write(&dir, "ok.csv", "1\n2\n");
    let out = flsa(&["denoise", p(&input), "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lambda_selector_is_exclusive() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1\n2\n");
    let both = flsa(&["denoise", p(&input), "--lambda", "1", "--lambda-frac", "0.5"]);
    assert_eq!(both.status.code(), Some(1));
    let neither = flsa(&["denoise", p(&input)]);
    assert_eq!(neither.status.code(), Some(1));
    assert_eq!(flsa(&["--help"]).status.code(), Some(0));
}

#[test]
fn path_document() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "0\n0\n1\n1\n");
    let out = flsa(&["path", p(&input)]);
    assert!(out.status.success());
    let body = stdout(&out);
    assert_schema("path.schema.json", &body);
    let doc: PathDocument = serde_json::from_str(&body).unwrap();
    assert!(doc.nested);
    assert_eq!(doc.events.first().unwrap().change_points, vec![2]);
    let last = doc.events.last().unwrap();
    assert_eq!(last.lambda, 1.0);
    assert!(last.change_points.is_empty());

    let out = flsa(&["path", p(&input), "--format", "csv"]);
    assert_eq!(stdout(&out), "lambda,change_points\n0,2\n1,\n");
}

#[test]
fn variance_document() {
    let dir = TempDir::new().unwrap();
    let values: Vec<String> = (0..200)
        .map(|t| {
            let s = if t < 100 { 1.0 } else { 4.0 };
            format!("{}", s * if t % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect();
    let input = write(&dir, "y.csv", &values.join("\n"));
    let out = flsa(&["variance", p(&input), "--lambda-frac", "0.3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_schema("segmentation.schema.json", &body);
    let doc: SegmentationDocument = serde_json::from_str(&body).unwrap();
    assert_eq!(doc.change_points, vec![100]);
    assert_eq!(doc.provenance.command, "variance");

    let zeros = write(&dir, "zeros.csv", "0\n0\n0\n");
    assert_eq!(flsa(&["variance", p(&zeros), "--lambda", "1"]).status.code(), Some(1));
}

#[test]
fn trend_keeps_affine_signals() {
    let dir = TempDir::new().unwrap();
    let values: Vec<String> = (0..30).map(|t| format!("{}", 1.5 + 0.25 * t as f64)).collect();
    let input = write(&dir, "y.csv", &values.join("\n"));
    let out = flsa(&["trend", p(&input), "--lambda", "10"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_schema("trend.schema.json", &body);
    let doc: TrendDocument = serde_json::from_str(&body).unwrap();
    assert!(doc.kkt.feasible);
    assert!(doc.kink_points.is_empty());
    for (t, v) in doc.fitted.iter().enumerate() {
        assert!((v - (1.5 + 0.25 * t as f64)).abs() < 1e-9);
    }
    let short = write(&dir, "short.csv", "1\n2\n");
    assert_eq!(flsa(&["trend", p(&short), "--lambda", "1"]).status.code(), Some(1));
}

#[test]
fn irrep_tent_profile() {
    let out = flsa(&["irrep", "--n", "100", "--knots", "50", "--signs", "+"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<(usize, f64, u8)> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 99);
    for (t, v, knot) in rows {
        if t == 50 {
            assert_eq!((v, knot), (1.0, 1));
        } else {
            assert!(v < 1.0 && v > 0.0);
            assert!((v - (t.min(100 - t) as f64 / 50.0)).abs() < 1e-12);
        }
    }
    let out = flsa(&["irrep", "--n", "10", "--knots", "3,6", "--signs", "-,+"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let bad = flsa(&["irrep", "--n", "10", "--knots", "3,6", "--signs", "+"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn simulate_requires_a_seed() {
    let out = flsa(&["simulate", "--n", "10", "--change-points", "5", "--levels", "1,2"]);
    assert_eq!(out.status.code(), Some(1));
    let args = ["simulate", "--n", "10", "--change-points", "5", "--levels", "-1,2", "--seed", "4"];
    let a = flsa(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&flsa(&args)));
    assert_eq!(stdout(&a).lines().count(), 11);
    let exact = flsa(&[
        "simulate", "--n", "4", "--change-points", "2", "--levels", "1,2", "--noise-sd", "0", "--seed", "1",
    ]);
    assert_eq!(stdout(&exact), "y\n1\n1\n2\n2\n");
}

fn small_config(dir: &TempDir, file: &str, reps: usize) -> PathBuf {
    let text = std::fs::read_to_string(repo_file(file)).unwrap();
    let name = Path::new(file).file_name().unwrap().to_str().unwrap();
    write(dir, name, &text.replace("reps = 200", &format!("reps = {reps}")))
}

#[test]
fn experiment_on_example2() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, "configs/example2.toml", 6);
    let out = flsa(&["experiment", p(&cfg), "--seed", "7", "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_schema("experiment.schema.json", &body);
    let doc: Value = serde_json::from_str(&body).unwrap();
    let summary = &doc["report"]["summaries"][0];
    assert!(summary["failure_frequency"].is_number());
    assert_eq!(summary["grid"].as_array().unwrap().len(), 50);
    assert_eq!(doc["provenance"]["seed"], 7);
    assert_eq!(doc["report"]["replicates"].as_array().unwrap().len(), 6);

    let single = flsa(&["experiment", p(&cfg), "--seed", "7", "--threads", "1"]);
    assert_eq!(stdout(&single), body);
}

#[test]
fn experiment_needs_a_consistent_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir, "configs/example1.toml", 2);
    assert_eq!(flsa(&["experiment", p(&cfg)]).status.code(), Some(1));

    let text = std::fs::read_to_string(&cfg).unwrap();
    let seeded = write(&dir, "seeded.toml", &format!("seed = 3\n{text}"));
    assert_eq!(flsa(&["experiment", p(&seeded), "--seed", "4"]).status.code(), Some(3));
    assert!(flsa(&["experiment", p(&seeded), "--seed", "3", "--no-replicates"]).status.success());
}

#[test]
fn bad_configs_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(repo_file("configs/example1.toml")).unwrap();
    let unknown = write(&dir, "unknown.toml", &format!("colour = 1\n{text}"));
    assert_eq!(flsa(&["experiment", p(&unknown), "--seed", "1"]).status.code(), Some(3));
    let no_reps = write(&dir, "reps.toml", &text.replace("reps = 200", "reps = 0"));
    assert_eq!(flsa(&["experiment", p(&no_reps), "--seed", "1"]).status.code(), Some(3));
    let staircase = small_config(&dir, "configs/example2.toml", 2);
    let out = flsa(&["experiment", p(&staircase), "--seed", "1", "--sweep"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("run_example2"), "{}", stderr(&out));
    let cfg = small_config(&dir, "configs/example1.toml", 2);
    assert_eq!(
        flsa(&["experiment", p(&cfg), "--seed", "1", "--threads", "0"]).status.code(),
        Some(3)
    );
}

#[test]
fn committed_configs_match_the_presets() {
    let load = |file: &str| load_config(&std::fs::read_to_string(repo_file(file)).unwrap(), 99).unwrap();
    assert_eq!(load("configs/example1.toml"), example1_config(200, 99));
    assert_eq!(load("configs/example2.toml"), example2_config(200, 99));
    assert_eq!(load("configs/sweep.toml"), sweep_config(200, 99));
}
