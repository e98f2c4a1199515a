//! Confusion matrices, per-class scores, agreement coefficients, ROC curves
//! and report rendering.

mod confusion;
mod report;
mod roc;
mod scores;

pub use confusion::{confusion, BinaryCounts, ConfusionMatrix};
pub use report::{classification_report, render_report, AverageRow, ClassReport, ClassRow, ReportFormat, CSV_HEADER};
pub use roc::{auc, macro_average_roc, roc_csv, roc_curve, roc_ovr, RocCurve};
pub use scores::{binary_metrics, cohen_kappa, cohen_kappa_ovr, eq_metrics, mcc, mcc_binary, mcc_ovr, EqMetrics};
