use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use botnet_ids::data::{
    balance_classes, load_dataset, load_nbaiot, save_dataset, stratified_split, to_model_input, ClassMap,
    DatasetSplit, LabelVocab, LoadOptions,
};
use botnet_ids::metrics::{
    classification_report, confusion, macro_average_roc, render_report, roc_csv, roc_ovr, ClassReport,
    ReportFormat,
};
use botnet_ids::model::{build_model, load_checkpoint, save_checkpoint, Checkpoint};
use botnet_ids::training::{evaluate_chunked, fit, FitOutcome};
use botnet_ids::{Error, Mode, Result};

use crate::config::RunConfig;

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Usage(format!("{key} is required")))
}

/// Create the output directory and record the resolved configuration in it.
pub fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write(&cfg.out.join("config.resolved.txt"), &cfg.to_text())
}

pub const DATASET_FILE: &str = "dataset.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CURVES_FILE: &str = "curves.csv";

/// Device-by-class row counts in the layout of the dataset's schema table.
pub fn counts_table(counts: &BTreeMap<(String, String), usize>, vocab: &LabelVocab) -> String {
    let devices: Vec<&String> = {
        let mut d: Vec<&String> = counts.keys().map(|(d, _)| d).collect();
        d.dedup();
        d
    };
    let mut out = String::from("device");
    for c in vocab.names() {
        let _ = write!(out, ",{c}");
    }
    out.push_str(",total\n");
    let mut col_totals = vec![0usize; vocab.len()];
    for d in devices {
        let _ = write!(out, "{d}");
        let mut total = 0;
        for (k, c) in vocab.names().iter().enumerate() {
            let n = counts.get(&(d.clone(), c.clone())).copied().unwrap_or(0);
            col_totals[k] += n;
            total += n;
            let _ = write!(out, ",{n}");
        }
        let _ = writeln!(out, ",{total}");
    }
    out.push_str("total");
    for n in &col_totals {
        let _ = write!(out, ",{n}");
    }
    let _ = writeln!(out, ",{}", col_totals.iter().sum::<usize>());
    out
}

/// Load, balance, split and scale the CSV corpus into `out/dataset.bin`.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<DatasetSplit> {
    let dir = required(&cfg.data_dir, "data_dir")?;
    if !dir.is_dir() {
        return Err(Error::Usage(format!("data directory {} does not exist", dir.display())));
    }
    prepare_out(cfg)?;
    let vocab = LabelVocab::nbaiot();
    let opts = LoadOptions {
        device_filter: cfg.devices.clone(),
        class_map: ClassMap { vocab: vocab.clone(), ..ClassMap::default() },
        reservoir: Some((cfg.per_class, cfg.seed)),
    };
    let started = Instant::now();
    let table = load_nbaiot(dir, &opts)?;
    let counts = counts_table(&table.counts, &vocab);
    write(&cfg.out.join("counts.csv"), &counts)?;
    log::info!(
        "read {} files in {:.1}s ({} rows rejected, {} files skipped)\n{counts}",
        table.files.len(),
        started.elapsed().as_secs_f64(),
        table.rejected_rows,
        table.skipped.len()
    );
    let balanced = balance_classes(&table, &vocab, cfg.per_class, cfg.seed)?;
    let split = stratified_split(&balanced, &vocab, cfg.test_fraction, cfg.seed)?;
    save_dataset(&split, &cfg.out.join(DATASET_FILE))?;
    log::info!("dataset: {} train rows, {} test rows", split.n_train(), split.n_test());
    Ok(split)
}

/// Train on the training partition of `cfg.dataset`; writes the checkpoint
/// and learning curves.
pub fn cmd_train(cfg: &RunConfig) -> Result<FitOutcome> {
    let data = load_dataset(required(&cfg.dataset, "dataset")?)?;
    if data.vocab.len() != cfg.model.n_classes {
        return Err(Error::Config(format!(
            "model has {} classes but the dataset vocabulary has {}",
            cfg.model.n_classes,
            data.vocab.len()
        )));
    }
    if data.n_features() != cfg.model.input_len * cfg.model.input_channels {
        return Err(Error::Config(format!(
            "model input is {}x{} but dataset rows have {} features",
            cfg.model.input_channels,
            cfg.model.input_len,
            data.n_features()
        )));
    }
    prepare_out(cfg)?;
    let params = build_model(&cfg.model, cfg.seed)?;
    log::info!("model has {} trainable parameters", params.trainable_count());
    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.seed;
    let started = Instant::now();
    let outcome = fit(params, &data.train_x, &data.train_y, &tcfg)?;
    save_checkpoint(&outcome.params, &data.scaler, &data.vocab, &cfg.out.join(CHECKPOINT_FILE))?;
    write(&cfg.out.join(CURVES_FILE), &outcome.curves.to_csv())?;
    let e = outcome.best_epoch - 1;
    log::info!(
        "trained {} epochs in {:.1}s; best epoch {} (train loss {:.5}, train acc {:.4}, val loss {:.5}, val acc {:.4}){}",
        outcome.curves.epochs(),
        started.elapsed().as_secs_f64(),
        outcome.best_epoch,
        outcome.curves.train_loss[e],
        outcome.curves.train_accuracy[e],
        outcome.curves.val_loss[e],
        outcome.curves.val_accuracy[e],
        if outcome.stopped_early { "; stopped early" } else { "" }
    );
    Ok(outcome)
}

fn formats(spec: &str) -> Result<Vec<ReportFormat>> {
    if spec == "all" {
        return Ok(vec![ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json]);
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

/// Score a checkpoint on one partition of a dataset and write the reports,
/// ROC points and confusion matrix.
pub fn cmd_eval(cfg: &RunConfig) -> Result<ClassReport> {
    let fmts = formats(&cfg.format)?;
    let data = load_dataset(required(&cfg.dataset, "dataset")?)?;
    let ck = load_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    if ck.vocab != data.vocab {
        return Err(Error::Config(format!(
            "checkpoint vocabulary [{}] differs from dataset vocabulary [{}]",
            ck.vocab.names().join(", "),
            data.vocab.names().join(", ")
        )));
    }
    let (x, y) = match cfg.split.as_str() {
        "test" => (&data.test_x, &data.test_y),
        "train" => (&data.train_x, &data.train_y),
        other => return Err(Error::Config(format!("split must be test or train, got {other:?}"))),
    };
    prepare_out(cfg)?;
    let input = to_model_input(x, data.n_features())?;
    let ev = evaluate_chunked(&ck.params, &input, y, cfg.train.eval_batch_size)?;
    let cm = confusion(y, &ev.predictions, data.vocab.len())?.with_names(data.vocab.names())?;
    let curves = roc_ovr(&ev.probs, y)?;
    let defined: Vec<_> = curves.iter().flatten().cloned().collect();
    let macro_auc = macro_average_roc(&defined).ok();
    let report = classification_report(&cm)?
        .with_auc(&curves.iter().map(|c| c.as_ref().map(|c| c.auc)).collect::<Vec<_>>(), macro_auc.as_ref().map(|m| m.auc))?;
    for f in fmts {
        write(&cfg.out.join(format!("report.{}", f.extension())), &render_report(&report, f))?;
    }
    let mut named: Vec<(String, _)> = data
        .vocab
        .names()
        .iter()
        .zip(curves)
        .filter_map(|(n, c)| c.map(|c| (n.clone(), c)))
        .collect();
    if let Some(m) = macro_auc {
        named.push(("macro".into(), m));
    }
    write(&cfg.out.join("roc.csv"), &roc_csv(&named))?;
    log::info!("{} split: loss {:.5}\n{}", cfg.split, ev.loss, render_report(&report, ReportFormat::Text));
    Ok(report)
}

/// Summary of an `infer` run.
#[derive(Debug, Clone, PartialEq)]
pub struct InferSummary {
    pub rows: usize,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
}

/// Classify every row of `cfg.input_csv` one sample at a time.
pub fn cmd_infer(cfg: &RunConfig) -> Result<InferSummary> {
    let input = required(&cfg.input_csv, "input_csv")?;
    let output = required(&cfg.output_csv, "output_csv")?;
    let Checkpoint { params, scaler, vocab } = load_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    let width = params.config.input_channels * params.config.input_len;
    let schema = |msg: String| Error::Schema { file: input.to_path_buf(), msg };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(input)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(input, io),
            other => schema(format!("{other:?}")),
        })?;
    let n_cols = reader.headers().map_err(|e| schema(e.to_string()))?.len();
    if n_cols != width || width != scaler.n_features() {
        return Err(schema(format!("{n_cols} columns, the checkpoint expects {width}")));
    }
    let mut out = String::from("row_id,predicted_class");
    for k in 0..vocab.len() {
        let _ = write!(out, ",p_{k}");
    }
    out.push_str(",latency_ms\n");
    let mut latencies = Vec::new();
    let mut row = vec![0.0; width];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| schema(format!("row {i}: {e}")))?;
        if rec.len() != width {
            return Err(schema(format!("row {i} has {} cells, expected {width}", rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| schema(format!("row {i}, column {j}: {cell:?} is not a number")))?;
            row[j] = scaler.transform_value(j, v);
        }
        let started = Instant::now();
        let x = to_model_input(&row, width)?.reshape(vec![1, params.config.input_channels, params.config.input_len])?;
        let fwd = botnet_ids::model::model_forward(&params, &x, Mode::Infer, None)?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        latencies.push(ms);
        let probs = fwd.probs.data();
        let pred = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (k, &p)| if p > b.1 { (k, p) } else { b })
            .0;
        let _ = write!(out, "{i},{}", vocab.name(pred).unwrap());
        for p in probs {
            let _ = write!(out, ",{p}");
        }
        let _ = writeln!(out, ",{ms}");
    }
    let dir = output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(output, &out)?;
    write(&dir.join("config.resolved.txt"), &cfg.to_text())?;
    let summary = latency_summary(&latencies);
    log::info!(
        "classified {} rows: mean latency {:.3} ms/sample, p95 {:.3} ms",
        summary.rows,
        summary.mean_latency_ms,
        summary.p95_latency_ms
    );
    Ok(summary)
}

fn latency_summary(latencies: &[f64]) -> InferSummary {
    if latencies.is_empty() {
        return InferSummary { rows: 0, mean_latency_ms: 0.0, p95_latency_ms: 0.0 };
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    InferSummary {
        rows: latencies.len(),
        mean_latency_ms: latencies.iter().sum::<f64>() / latencies.len() as f64,
        p95_latency_ms: sorted[rank - 1],
    }
}
