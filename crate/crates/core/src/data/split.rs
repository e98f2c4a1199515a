use rand::seq::SliceRandom;

use super::nbaiot::{RawTable, N_FEATURES};
use super::scaler::MinMaxScaler;
use super::vocab::LabelVocab;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Rows of each class, in table order.
fn rows_by_class(labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (row, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::Label { row, label: l, n_classes });
        }
        by_class[l].push(row);
    }
    Ok(by_class)
}

/// Seeded uniform subsample of exactly `per_class` rows of every class, in a
/// shuffled order.
pub fn balance_classes(table: &RawTable, vocab: &LabelVocab, per_class: usize, seed: u64) -> Result<RawTable> {
    if per_class == 0 {
        return Err(Error::Config("per_class must be positive".into()));
    }
    let by_class = rows_by_class(&table.labels, vocab.len())?;
    let mut keep = Vec::with_capacity(per_class * vocab.len());
    for (c, rows) in by_class.into_iter().enumerate() {
        if rows.len() < per_class {
            return Err(Error::InsufficientRows {
                class: vocab.name(c).unwrap().to_string(),
                available: rows.len(),
                requested: per_class,
            });
        }
        let mut r = rng::stream(seed, &format!("balance/{c}"));
        let mut rows = rows;
        let (picked, _) = rows.partial_shuffle(&mut r, per_class);
        keep.extend_from_slice(picked);
    }
    keep.shuffle(&mut rng::stream(seed, "balance/order"));
    Ok(table.select(&keep))
}

/// Min-max scaler fitted on `[n, 115]` training rows.
pub fn fit_transform_scaler(train_rows: &[f64]) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(train_rows, N_FEATURES)
}

pub fn apply_scaler(scaler: &MinMaxScaler, rows: &[f64]) -> Result<Vec<f64>> {
    scaler.transform(rows)
}

/// Scaled, stratified train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    /// Row-major `[n_train, 115]`, scaled.
    pub train_x: Vec<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<f64>,
    pub test_y: Vec<usize>,
    pub scaler: MinMaxScaler,
    pub vocab: LabelVocab,
    pub seed: u64,
    /// Source-table row index of every train and test row.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Files the rows were read from.
    pub files: Vec<String>,
}

impl DatasetSplit {
    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    pub fn n_train(&self) -> usize {
        self.train_y.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_y.len()
    }
}

/// Per-class partition of row indices: `round(n·fraction)` rows of each class
/// go to the second part. Both parts come back in a seeded shuffled order.
pub fn stratified_indices(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
    stream: &str,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let by_class = rows_by_class(labels, n_classes)?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (c, mut rows) in by_class.into_iter().enumerate() {
        if rows.len() < 2 {
            first.extend_from_slice(&rows);
            continue;
        }
        rows.shuffle(&mut rng::stream(seed, &format!("{stream}/{c}")));
        let n_second = ((rows.len() as f64 * fraction).round() as usize).clamp(1, rows.len() - 1);
        second.extend_from_slice(&rows[..n_second]);
        first.extend_from_slice(&rows[n_second..]);
    }
    first.shuffle(&mut rng::stream(seed, &format!("{stream}/first")));
    second.shuffle(&mut rng::stream(seed, &format!("{stream}/second")));
    Ok((first, second))
}

/// Stratified train/test split with the scaler fitted on the train part only.
pub fn stratified_split(table: &RawTable, vocab: &LabelVocab, test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}; a test set is required"
        )));
    }
    for (c, &n) in table.class_counts(vocab.len()).iter().enumerate() {
        if n < 5 {
            return Err(Error::InsufficientRows {
                class: vocab.name(c).unwrap().to_string(),
                available: n,
                requested: 5,
            });
        }
    }
    let (train_rows, test_rows) = stratified_indices(&table.labels, vocab.len(), test_fraction, seed, "split")?;
    let gather = |rows: &[usize]| -> Vec<f64> { rows.iter().flat_map(|&i| table.row(i).iter().copied()).collect() };
    let train_raw = gather(&train_rows);
    let scaler = fit_transform_scaler(&train_raw)?;
    Ok(DatasetSplit {
        train_x: apply_scaler(&scaler, &train_raw)?,
        train_y: train_rows.iter().map(|&i| table.labels[i]).collect(),
        test_x: apply_scaler(&scaler, &gather(&test_rows))?,
        test_y: test_rows.iter().map(|&i| table.labels[i]).collect(),
        scaler,
        vocab: vocab.clone(),
        seed,
        train_rows,
        test_rows,
        files: table.files.clone(),
    })
}

/// `[n, 115]` rows as a single-channel `[n, 1, 115]` batch.
pub fn to_model_input(rows: &[f64], n_features: usize) -> Result<Tensor> {
    if n_features == 0 || rows.is_empty() || !rows.len().is_multiple_of(n_features) {
        return Err(Error::Shape(format!("{} values are not rows of width {n_features}", rows.len())));
    }
    Tensor::new(vec![rows.len() / n_features, 1, n_features], rows.to_vec())
}
