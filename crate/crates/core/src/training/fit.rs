use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::data::stratified_indices;
use crate::error::{Error, Result};
use crate::model::{model_backward, model_forward, Dropouts, ModelParams};
use crate::rng;
use crate::tensor::{Mode, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// Smallest validation-loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Stratified share of the training rows held out for early stopping.
    pub validation_fraction: f64,
    pub learning_rate: f64,
    /// Rows per inference chunk when scoring the validation slice.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 50,
            early_stop_patience: 5,
            min_delta: 1e-4,
            seed: 42,
            shuffle: true,
            validation_fraction: 0.1,
            learning_rate: 0.001,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch_size, epochs and eval_batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.min_delta >= 0.0) {
            return Err(Error::Config("learning_rate must be positive and min_delta non-negative".into()));
        }
        Ok(())
    }
}

/// Per-epoch learning curves. Train values are averages over the epoch's
/// train-mode batches; validation values come from an inference pass at the
/// end of the epoch (NaN when no validation slice is held out).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurves {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl TrainingCurves {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for e in 0..self.epochs() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e + 1,
                self.train_loss[e],
                self.train_accuracy[e],
                self.val_loss[e],
                self.val_accuracy[e]
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters of the epoch with the lowest monitored loss.
    pub params: ModelParams,
    pub curves: TrainingCurves,
    /// 1-based epoch the returned parameters come from.
    pub best_epoch: usize,
    /// Validation loss of the returned parameters (train loss without a
    /// validation slice).
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Inference-mode scores of a labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    /// `[N, n_classes]`.
    pub probs: Tensor,
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Mean cross-entropy, accuracy and argmax predictions of `params` on `x`
/// (`[N, C, L]`), evaluated `chunk` rows at a time.
pub fn evaluate_chunked(params: &ModelParams, x: &Tensor, labels: &[usize], chunk: usize) -> Result<Evaluation> {
    let (n, _, _) = x.dims3()?;
    if labels.len() != n {
        return Err(Error::Dimension { op: "evaluate", lhs: vec![n], rhs: vec![labels.len()] });
    }
    let k = params.config.n_classes;
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Label { row, label, n_classes: k });
    }
    let probs = params.predict_proba(x, chunk)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(n);
    for (row, &label) in probs.data().chunks_exact(k).zip(labels) {
        loss -= row[label].max(f64::MIN_POSITIVE).ln();
        let p = argmax(row);
        correct += usize::from(p == label);
        predictions.push(p);
    }
    Ok(Evaluation { loss: loss / n as f64, accuracy: correct as f64 / n as f64, predictions, probs })
}

pub fn evaluate(params: &ModelParams, x: &Tensor, labels: &[usize]) -> Result<Evaluation> {
    evaluate_chunked(params, x, labels, 256)
}

fn gather(x: &[f64], width: usize, rows: &[usize], shape: [usize; 2]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(rows.len() * width);
    for &i in rows {
        data.extend_from_slice(&x[i * width..(i + 1) * width]);
    }
    Tensor::new(vec![rows.len(), shape[0], shape[1]], data)
}

/// Train `params` on row-major `x` (`[N, channels·length]`) with labels `y`.
///
/// Only the rows given here are touched: the validation slice used for early
/// stopping is carved out of them.
pub fn fit(params: ModelParams, x: &[f64], y: &[usize], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let mcfg = params.config.clone();
    let shape = [mcfg.input_channels, mcfg.input_len];
    let width = shape[0] * shape[1];
    if y.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if x.len() != y.len() * width {
        return Err(Error::Dimension { op: "fit", lhs: vec![x.len()], rhs: vec![y.len(), width] });
    }
    if let Some((row, &label)) = y.iter().enumerate().find(|(_, &l)| l >= mcfg.n_classes) {
        return Err(Error::Label { row, label, n_classes: mcfg.n_classes });
    }

    let (train_idx, val_idx) = if cfg.validation_fraction > 0.0 {
        stratified_indices(y, mcfg.n_classes, cfg.validation_fraction, cfg.seed, "validation")?
    } else {
        ((0..y.len()).collect(), Vec::new())
    };
    if cfg.batch_size > train_idx.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training rows",
            cfg.batch_size,
            train_idx.len()
        )));
    }
    let val = if val_idx.is_empty() {
        None
    } else {
        let labels: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();
        Some((gather(x, width, &val_idx, shape)?, labels))
    };

    let mut params = params;
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut drops = Dropouts::new(&mcfg, cfg.seed)?;
    let mut curves = TrainingCurves::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0usize;
    let mut order = train_idx.clone();
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut rng::stream(cfg.seed, &format!("shuffle/{epoch}")));
        }
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let xb = gather(x, width, batch, shape)?;
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let cache = model_forward(&params, &xb, Mode::Train, Some(&mut drops))?;
            let (loss, grads) = model_backward(&params, &cache, &yb)?;
            if !loss.is_finite() {
                return Err(Error::Internal(format!("non-finite training loss at epoch {epoch}")));
            }
            params.update_running_stats(&cache);
            adam.step(&mut params, &grads)?;
            loss_sum += loss * batch.len() as f64;
            correct += cache
                .probs
                .data()
                .chunks_exact(mcfg.n_classes)
                .zip(&yb)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
        }
        let n = order.len() as f64;
        curves.train_loss.push(loss_sum / n);
        curves.train_accuracy.push(correct as f64 / n);
        let monitored = match &val {
            Some((vx, vy)) => {
                let ev = evaluate_chunked(&params, vx, vy, cfg.eval_batch_size)?;
                curves.val_loss.push(ev.loss);
                curves.val_accuracy.push(ev.accuracy);
                ev.loss
            }
            None => {
                curves.val_loss.push(f64::NAN);
                curves.val_accuracy.push(f64::NAN);
                loss_sum / n
            }
        };
        log::info!(
            "epoch {epoch}: train_loss {:.5} train_acc {:.4} val_loss {:.5} val_acc {:.4} ({:.1}s)",
            curves.train_loss[epoch - 1],
            curves.train_accuracy[epoch - 1],
            curves.val_loss[epoch - 1],
            curves.val_accuracy[epoch - 1],
            started.elapsed().as_secs_f64()
        );
        let improved = best.as_ref().is_none_or(|(b, _, _)| monitored < b - cfg.min_delta);
        if improved {
            best = Some((monitored, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                log::info!("early stop after epoch {epoch}");
                stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    let (best_loss, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(FitOutcome { params, curves, best_epoch, best_loss, stopped_early })
}
