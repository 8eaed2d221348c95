//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use siamprune::model::save_model;
use siamprune::{Activation, Layer, Network32};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siamprune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn identity_net(dim: usize) -> Network32 {
    let mut w = vec![0.0f32; dim * dim];
    for i in 0..dim {
        w[i * dim + i] = 1.0;
    }
    Network32::from_layers(vec![Layer::new(dim, dim, Activation::Linear, w, vec![0.0; dim]).unwrap()]).unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();
    ok(&["gen", "--points", "12", "--per-point", "4", "--dim", "32", "--out", o]);
    ok(&["train", "--train", &p(d, "train.spds"), "--arch", "32,24,16", "--epochs", "4", "--out", o]);
    ok(&["profile", "--model", &p(d, "model.spnn"), "--data", &p(d, "val.spds"), "--out", o]);
    ok(&["prune", "--model", &p(d, "model.spnn"), "--data", &p(d, "val.spds"), "--threshold", "0.2", "--out", o]);
    ok(&[
        "loop", "--model", &p(d, "model.spnn"), "--train", &p(d, "train.spds"), "--val", &p(d, "val.spds"),
        "--max-iter", "2", "--retrain-epochs", "2", "--out", o,
    ]);
    let out = ok(&["eval", "--model", &p(d, "model_final.spnn"), "--data", &p(d, "val.spds"), "--roc", "--out", o]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("error_at_95_percent="), "{stdout}");
    for name in [
        "gen_summary.json",
        "model.spnn",
        "train_report.txt",
        "train_summary.json",
        "profile.txt",
        "pruned.spnn",
        "prune_report.txt",
        "eval_report_baseline.txt",
        "eval_report_final.txt",
        "loop_summary.json",
        "eval_report.txt",
        "roc.csv",
        "eval_summary.json",
    ] {
        assert!(d.join(name).exists(), "missing {name}");
    }
    let prune_text = std::fs::read_to_string(d.join("prune_report.txt")).unwrap();
    assert!(prune_text.contains("name before after removed_ratio_percent"));
    let roc = std::fs::read_to_string(d.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,tpr,fpr\n"));
}

#[test]
fn text_and_json_reports_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();
    ok(&["gen", "--points", "10", "--per-point", "4", "--dim", "16", "--out", o]);
    save_model(&identity_net(16), &d.join("id.spnn")).unwrap();
    ok(&["eval", "--model", &p(d, "id.spnn"), "--data", &p(d, "val.spds"), "--out", o]);
    let text = std::fs::read_to_string(d.join("eval_report.txt")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval_summary.json")).unwrap()).unwrap();
    let field = |k: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap_or_else(|| panic!("no {k} in {text}"))
            .to_string()
    };
    assert_eq!(field("error_at_95_percent"), json["error_at_95_percent"].as_str().unwrap());
    assert_eq!(field("n_match"), json["n_match"].to_string());
    assert_eq!(field("n_nonmatch"), json["n_nonmatch"].to_string());
    let t: f64 = field("threshold").parse().unwrap();
    assert!((t - json["threshold"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn noiseless_data_with_identity_network_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();
    ok(&["gen", "--points", "15", "--per-point", "5", "--dim", "8", "--sigma", "0", "--out", o]);
    save_model(&identity_net(8), &d.join("id.spnn")).unwrap();
    let out = ok(&["eval", "--model", &p(d, "id.spnn"), "--data", &p(d, "val.spds"), "--out", o]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("error_at_95_percent=0.00"), "{stdout}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = bin(&["gen", "--points", "1", "--out", o]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bin(&["train", "--out", o]).status.code(), Some(2));
}

#[test]
fn unreadable_inputs_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("junk.spnn"), b"not a model").unwrap();
    std::fs::write(d.join("junk.spds"), b"not a dataset").unwrap();
    let out = bin(&["eval", "--model", &p(d, "junk.spnn"), "--data", &p(d, "junk.spds"), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let out = bin(&["eval", "--model", &p(d, "missing.spnn"), "--data", &p(d, "junk.spds"), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mismatched_model_and_data_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();
    ok(&["gen", "--points", "6", "--per-point", "3", "--dim", "16", "--out", o]);
    save_model(&identity_net(8), &d.join("id.spnn")).unwrap();
    let out = bin(&["eval", "--model", &p(d, "id.spnn"), "--data", &p(d, "val.spds"), "--out", o]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, format!("# run\npoints = 7\nper-point = 3\ndim = 8\nout = {}\n", d.display())).unwrap();
    ok(&["gen", "--config", cfg.to_str().unwrap(), "--dim", "12"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("gen_summary.json")).unwrap()).unwrap();
    let ds: siamprune::Dataset32 = siamprune::dataio::read_dataset(&d.join("train.spds")).unwrap();
    assert_eq!(ds.dim(), 12);
    assert_eq!(ds.len(), 21);
    assert_eq!(summary["dim"], 12);
    assert_eq!(summary["points"], 7);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = bin(&["gen", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn loop_with_single_iteration_writes_one_prune_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();
    ok(&["gen", "--points", "12", "--per-point", "4", "--dim", "16", "--out", o]);
    ok(&["train", "--train", &p(d, "train.spds"), "--arch", "16,32,8", "--epochs", "3", "--out", o]);
    ok(&[
        "loop", "--model", &p(d, "model.spnn"), "--train", &p(d, "train.spds"), "--val", &p(d, "val.spds"),
        "--max-iter", "1", "--threshold", "0.5", "--rollback-tol", "100", "--retrain-epochs", "1", "--out", o,
    ]);
    assert!(d.join("prune_report_iter0.txt").exists());
    assert!(!d.join("prune_report_iter1.txt").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("loop_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"].as_array().unwrap().len(), 1);
    assert_eq!(summary["stop"], "max_iterations");
}
