use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Points of a ROC curve from `(0, 0)` to `(1, 1)`. `thresholds[k]` is the
/// score at or above which samples count as positive at point `k`; the first
/// point uses `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Trapezoidal area under `(fpr, tpr)`.
pub fn auc(fpr: &[f64], tpr: &[f64]) -> f64 {
    fpr.windows(2)
        .zip(tpr.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0)
        .sum()
}

/// One curve point per distinct score, scanned in descending order.
pub fn roc_curve(scores: &[f64], truths: &[bool]) -> Result<RocCurve> {
    if scores.len() != truths.len() {
        return Err(Error::Dimension { op: "roc_curve", lhs: vec![scores.len()], rhs: vec![truths.len()] });
    }
    let pos = truths.iter().filter(|&&t| t).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedCurve(format!("{pos} positives and {neg} negatives")));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Data(format!("score {s} is not a number")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut fpr, mut tpr, mut thresholds) = (vec![0.0], vec![0.0], vec![f64::INFINITY]);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if truths[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
        thresholds.push(s);
    }
    let area = auc(&fpr, &tpr);
    Ok(RocCurve { fpr, tpr, thresholds, auc: area })
}

/// One-vs-rest curve of every class from `probs: [N, C]`. Classes absent from
/// `labels` (or present in every row) yield `None`.
pub fn roc_ovr(probs: &Tensor, labels: &[usize]) -> Result<Vec<Option<RocCurve>>> {
    let (n, c) = probs.dims2()?;
    if labels.len() != n {
        return Err(Error::Dimension { op: "roc_ovr", lhs: vec![n], rhs: vec![labels.len()] });
    }
    (0..c)
        .map(|k| {
            let scores: Vec<f64> = (0..n).map(|i| probs.data()[i * c + k]).collect();
            let truths: Vec<bool> = labels.iter().map(|&l| l == k).collect();
            match roc_curve(&scores, &truths) {
                Ok(curve) => Ok(Some(curve)),
                Err(Error::UndefinedCurve(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Lowest and highest TPR of `curve` at `x` (they differ at a vertical step).
fn tpr_range(curve: &RocCurve, x: f64) -> (f64, f64) {
    let lo = curve.fpr.partition_point(|&f| f < x);
    let hi = curve.fpr.partition_point(|&f| f <= x);
    if lo < hi {
        return (curve.tpr[lo], curve.tpr[hi - 1]);
    }
    let (x0, x1, y0, y1) = (curve.fpr[lo - 1], curve.fpr[lo], curve.tpr[lo - 1], curve.tpr[lo]);
    let y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    (y, y)
}

/// Macro-average curve: the pointwise mean TPR of the per-class curves, with
/// vertical steps kept, so its area equals the mean per-class area.
pub fn macro_average_roc(curves: &[RocCurve]) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::UndefinedCurve("no per-class curves to average".into()));
    }
    let mut grid: Vec<f64> = curves.iter().flat_map(|c| c.fpr.iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let k = curves.len() as f64;
    let (mut fpr, mut tpr) = (Vec::new(), Vec::new());
    for &x in &grid {
        let (lo, hi) = curves.iter().map(|c| tpr_range(c, x)).fold((0.0, 0.0), |(a, b), (l, h)| (a + l, b + h));
        fpr.push(x);
        tpr.push(lo / k);
        if hi > lo {
            fpr.push(x);
            tpr.push(hi / k);
        }
    }
    let area = auc(&fpr, &tpr);
    Ok(RocCurve { thresholds: vec![f64::NAN; fpr.len()], fpr, tpr, auc: area })
}

/// `class,threshold,fpr,tpr` rows for plotting.
pub fn roc_csv(curves: &[(String, RocCurve)]) -> String {
    let mut out = String::from("class,threshold,fpr,tpr\n");
    for (name, c) in curves {
        for k in 0..c.fpr.len() {
            out.push_str(&format!("{name},{},{},{}\n", c.thresholds[k], c.fpr[k], c.tpr[k]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(c.auc, 1.0);
        assert!(c.fpr.iter().zip(&c.tpr).any(|(&f, &t)| f == 0.0 && t == 1.0));
    }

    #[test]
    fn all_ties_give_diagonal() {
        let c = roc_curve(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(c.fpr, vec![0.0, 1.0]);
        assert_eq!(c.tpr, vec![0.0, 1.0]);
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedCurve(_))));
    }

    #[test]
    fn macro_of_identical_curves_is_that_curve_area() {
        let c = roc_curve(&[0.9, 0.7, 0.6, 0.2], &[true, false, true, false]).unwrap();
        let m = macro_average_roc(&[c.clone(), c.clone()]).unwrap();
        assert!((m.auc - c.auc).abs() < 1e-15);
        let d = roc_curve(&[0.1, 0.7, 0.6, 0.2], &[true, false, true, false]).unwrap();
        let m = macro_average_roc(&[c.clone(), d.clone()]).unwrap();
        assert!((m.auc - (c.auc + d.auc) / 2.0).abs() < 1e-15);
    }
}
