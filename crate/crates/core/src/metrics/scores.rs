use serde::{Deserialize, Serialize};

use super::confusion::{BinaryCounts, ConfusionMatrix};
use crate::error::{Error, Result};

/// One-vs-rest accuracy, recall, precision and F1 of a class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqMetrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn binary_metrics(b: BinaryCounts) -> EqMetrics {
    let (tp, fp, fn_, tn) = (b.tp as f64, b.fp as f64, b.fn_ as f64, b.tn as f64);
    let recall = ratio(tp, tp + fn_);
    let precision = ratio(tp, tp + fp);
    EqMetrics {
        accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
        recall,
        precision,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

/// Scores of `class` against the rest; zero denominators give 0.
pub fn eq_metrics(cm: &ConfusionMatrix, class: usize) -> Result<EqMetrics> {
    Ok(binary_metrics(cm.binary_counts(class)?))
}

fn nonempty(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Data("confusion matrix is empty".into())),
        n => Ok(n as f64),
    }
}

/// Cohen's kappa, `(p_o − p_e) / (1 − p_e)`.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = nonempty(cm)?;
    let p_o = cm.trace() as f64 / n;
    let p_e = (0..cm.n_classes())
        .map(|i| cm.row_sum(i) as f64 * cm.col_sum(i) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e == 1.0 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

fn binary_matrix(b: BinaryCounts) -> ConfusionMatrix {
    ConfusionMatrix::from_counts(2, vec![b.tp, b.fn_, b.fp, b.tn]).unwrap()
}

/// Kappa of the 2×2 one-vs-rest matrix of `class`.
pub fn cohen_kappa_ovr(cm: &ConfusionMatrix, class: usize) -> Result<f64> {
    nonempty(cm)?;
    cohen_kappa(&binary_matrix(cm.binary_counts(class)?))
}

/// Binary MCC; a zero denominator gives 0.
pub fn mcc_binary(b: BinaryCounts) -> f64 {
    let (tp, fp, fn_, tn) = (b.tp as f64, b.fp as f64, b.fn_ as f64, b.tn as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    ratio(tp * tn - fp * fn_, den)
}

pub fn mcc_ovr(cm: &ConfusionMatrix, class: usize) -> Result<f64> {
    nonempty(cm)?;
    Ok(mcc_binary(cm.binary_counts(class)?))
}

/// Multiclass MCC in covariance form:
/// `(c·s − Σ p_k t_k) / √((s² − Σ p_k²)(s² − Σ t_k²))`.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    let s = nonempty(cm)?;
    let c = cm.trace() as f64;
    let (mut pt, mut pp, mut tt) = (0.0, 0.0, 0.0);
    for k in 0..cm.n_classes() {
        let p = cm.col_sum(k) as f64;
        let t = cm.row_sum(k) as f64;
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    Ok(ratio(c * s - pt, ((s * s - pp) * (s * s - tt)).sqrt()))
}
