use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use super::scores::{cohen_kappa, cohen_kappa_ovr, eq_metrics, mcc, mcc_ovr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// One-vs-rest accuracy of this class.
    pub accuracy: f64,
    pub kappa: f64,
    pub mcc: f64,
    /// One-vs-rest ROC area, when scores were supplied.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class scores, averages and agreement coefficients of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassRow>,
    pub accuracy: f64,
    pub macro_avg: AverageRow,
    pub weighted_avg: AverageRow,
    pub kappa: f64,
    pub mcc: f64,
    pub macro_auc: Option<f64>,
    pub confusion: ConfusionMatrix,
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::Data("confusion matrix is empty".into()));
    }
    let mut classes = Vec::with_capacity(cm.n_classes());
    for (k, name) in cm.names().iter().enumerate() {
        let m = eq_metrics(cm, k)?;
        classes.push(ClassRow {
            class: name.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            support: cm.row_sum(k),
            accuracy: m.accuracy,
            kappa: cohen_kappa_ovr(cm, k)?,
            mcc: mcc_ovr(cm, k)?,
            auc: None,
        });
    }
    let c = classes.len() as f64;
    let avg = |f: fn(&ClassRow) -> f64| classes.iter().map(f).sum::<f64>() / c;
    let wavg = |f: fn(&ClassRow) -> f64| classes.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / n as f64;
    let macro_avg = AverageRow { precision: avg(|r| r.precision), recall: avg(|r| r.recall), f1: avg(|r| r.f1), support: n };
    let weighted_avg =
        AverageRow { precision: wavg(|r| r.precision), recall: wavg(|r| r.recall), f1: wavg(|r| r.f1), support: n };
    Ok(ClassReport {
        accuracy: cm.trace() as f64 / n as f64,
        macro_avg,
        weighted_avg,
        kappa: cohen_kappa(cm)?,
        mcc: mcc(cm)?,
        macro_auc: None,
        classes,
        confusion: cm.clone(),
    })
}

impl ClassReport {
    /// Attach per-class and macro-average ROC areas.
    pub fn with_auc(mut self, per_class: &[Option<f64>], macro_auc: Option<f64>) -> Result<Self> {
        if per_class.len() != self.classes.len() {
            return Err(Error::Shape(format!("{} AUC values for {} classes", per_class.len(), self.classes.len())));
        }
        for (row, a) in self.classes.iter_mut().zip(per_class) {
            row.auc = *a;
        }
        self.macro_auc = macro_auc;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format {other:?} (text, csv, json)"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: &str = "section,class,precision,recall,f1,support,accuracy,kappa,mcc,auc";

fn render_csv(r: &ClassReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for c in &r.classes {
        let _ = writeln!(
            out,
            "class,{},{},{},{},{},{},{},{},{}",
            c.class,
            c.precision,
            c.recall,
            c.f1,
            c.support,
            c.accuracy,
            c.kappa,
            c.mcc,
            opt(c.auc)
        );
    }
    let n = r.macro_avg.support;
    let _ = writeln!(out, "overall,accuracy,,,,{n},{},{},{},{}", r.accuracy, r.kappa, r.mcc, opt(r.macro_auc));
    for (name, a) in [("macro_avg", &r.macro_avg), ("weighted_avg", &r.weighted_avg)] {
        let _ = writeln!(out, "overall,{name},{},{},{},{},,,,", a.precision, a.recall, a.f1, a.support);
    }
    out
}

fn render_text(r: &ClassReport) -> String {
    let w = r.classes.iter().map(|c| c.class.len()).max().unwrap_or(0).max(12);
    let mut out = String::new();
    let _ = writeln!(out, "{:>w$} {:>9} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support", "accuracy");
    for c in &r.classes {
        let _ = writeln!(
            out,
            "{:>w$} {:>9.3} {:>9.3} {:>9.3} {:>9} {:>9.3}",
            c.class, c.precision, c.recall, c.f1, c.support, c.accuracy
        );
    }
    let _ = writeln!(out);
    let n = r.macro_avg.support;
    let _ = writeln!(out, "{:>w$} {:>9} {:>9} {:>9.3} {:>9}", "accuracy", "", "", r.accuracy, n);
    for (name, a) in [("macro avg", &r.macro_avg), ("weighted avg", &r.weighted_avg)] {
        let _ = writeln!(out, "{:>w$} {:>9.3} {:>9.3} {:>9.3} {:>9}", name, a.precision, a.recall, a.f1, a.support);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>w$} {:>9} {:>9} {:>9}", "", "kappa", "mcc", "auc");
    for c in &r.classes {
        let auc = c.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:>w$} {:>9.3} {:>9.3} {:>9}", c.class, c.kappa, c.mcc, auc);
    }
    let auc = r.macro_auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(out, "{:>w$} {:>9.3} {:>9.3} {:>9}", "overall", r.kappa, r.mcc, auc);
    out
}

/// Classification report, agreement table and (for JSON) the confusion
/// matrix. Text rounds to three decimals; CSV and JSON keep full precision.
pub fn render_report(r: &ClassReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(r),
        ReportFormat::Csv => render_csv(r),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
    }
}
