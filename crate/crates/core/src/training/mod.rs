//! Adam updates, the epoch loop with early stopping, and evaluation.

mod adam;
mod fit;

pub use adam::{adam_step, AdamState};
pub use fit::{evaluate, evaluate_chunked, fit, Evaluation, FitOutcome, TrainConfig, TrainingCurves};
