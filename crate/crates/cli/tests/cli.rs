use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use botnet_ids::data::{feature_names, gaussian_blobs, write_nbaiot_csv, BlobSpec, LabelVocab};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_botnet-ids")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tiny trained model under `dir/out`.
fn trained(dir: &Path) -> std::path::PathBuf {
    let corpus = dir.join("corpus");
    let table = gaussian_blobs(&BlobSpec { per_class: 20, ..BlobSpec::default() }).unwrap();
    write_nbaiot_csv(&corpus, &table, &LabelVocab::nbaiot()).unwrap();
    let out = dir.join("out");
    let small = ["--set", "conv_filters=4,4,4", "--set", "lstm_hidden=4", "--set", "attention_dk=4", "--set", "dense_units=8"];
    assert!(run(&["prepare", "--data-dir", s(&corpus), "--per-class", "20", "--out", s(&out)]).status.success());
    let dataset = out.join("dataset.bin");
    let mut args = vec!["train", "--dataset", s(&dataset), "--epochs", "1", "--batch-size", "16", "--out", s(&out)];
    args.extend(small);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn missing_data_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["prepare", "--data-dir", s(&dir.path().join("nowhere")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn unknown_setting_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["prepare", "--data-dir", s(dir.path()), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["train", "--epochs", "many"]).status.code(), Some(2));
}

#[test]
fn schema_violation_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("Danmini_Doorbell/benign_traffic.csv");
    fs::create_dir_all(file.parent().unwrap()).unwrap();
    fs::write(&file, "a,b\n1,2\n").unwrap();
    let o = run(&["prepare", "--data-dir", s(dir.path()), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn infer_on_empty_input_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = trained(dir.path());
    let input = dir.path().join("empty.csv");
    fs::write(&input, feature_names().join(",") + "\n").unwrap();
    let output = dir.path().join("pred/predictions.csv");
    let o = run(&["infer", "--checkpoint", s(&out.join("checkpoint.bin")), "--input-csv", s(&input), "--output-csv", s(&output)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = (0..10).map(|k| format!("p_{k}")).collect::<Vec<_>>().join(",");
    assert_eq!(fs::read_to_string(&output).unwrap(), format!("row_id,predicted_class,{header},latency_ms\n"));
    assert!(output.parent().unwrap().join("config.resolved.txt").exists());
}

#[test]
fn infer_labels_training_rows_and_rejects_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let out = trained(dir.path());
    let input = dir.path().join("corpus/synthetic/benign_traffic.csv");
    let output = dir.path().join("predictions.csv");
    let o = run(&["infer", "--checkpoint", s(&out.join("checkpoint.bin")), "--input-csv", s(&input), "--output-csv", s(&output)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&output).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 2 + 10 + 1);
        assert_eq!(cells[0], i.to_string());
        let p: f64 = cells[2..12].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }

    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "a,b\n1,2\n").unwrap();
    let o = run(&["infer", "--checkpoint", s(&out.join("checkpoint.bin")), "--input-csv", s(&narrow), "--output-csv", s(&output)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_writes_every_report_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = trained(dir.path());
    let eval = dir.path().join("eval");
    let o = run(&[
        "eval",
        "--dataset",
        s(&out.join("dataset.bin")),
        "--checkpoint",
        s(&out.join("checkpoint.bin")),
        "--format",
        "all",
        "--out",
        s(&eval),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.txt", "report.csv", "report.json", "roc.csv", "config.resolved.txt"] {
        assert!(eval.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(eval.join("report.csv")).unwrap();
    // 10 class rows, accuracy, macro and weighted averages under one header
    assert_eq!(csv.lines().count(), 1 + 10 + 3);
}
