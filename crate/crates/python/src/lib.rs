//! Python bindings: tensors, the forward primitives, the full network with
//! training and checkpoints, metrics, and the synthetic data generator.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use botnet_ids::data::{gaussian_blobs as blobs, BlobSpec, LabelVocab, MinMaxScaler};
use botnet_ids::metrics::{self, ReportFormat};
use botnet_ids::model::{build_model, load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use botnet_ids::recurrent::{attention_forward, bilstm_forward, AttentionParams, LstmDirection, LstmParams};
use botnet_ids::tensor::{self as ops, ConvParams, DenseParams, Padding};
use botnet_ids::training::{evaluate, fit, TrainConfig};
use botnet_ids::Error;

/// I/O failures raise `OSError`, broken invariants `RuntimeError`, and
/// everything else (bad shapes, configs, labels, files) `ValueError`.
fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for botnet_ids::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Dense row-major f64 tensor.
#[pyclass(name = "Tensor", module = "botnet_ids", from_py_object)]
#[derive(Clone)]
struct PyTensor(botnet_ids::Tensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(data: Vec<f64>, shape: Vec<usize>) -> PyResult<Self> {
        botnet_ids::Tensor::new(shape, data).py().map(PyTensor)
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> Self {
        PyTensor(botnet_ids::Tensor::zeros(&shape))
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn reshape(&self, shape: Vec<usize>) -> PyResult<Self> {
        self.0.clone().reshape(shape).py().map(PyTensor)
    }

    fn get(&self, index: Vec<usize>) -> PyResult<f64> {
        if index.len() != self.0.ndim() || index.iter().zip(self.0.shape()).any(|(i, n)| i >= n) {
            return Err(PyValueError::new_err(format!("index {index:?} outside shape {:?}", self.0.shape())));
        }
        Ok(self.0.get(&index))
    }

    fn sum(&self) -> f64 {
        self.0.sum()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.0.shape())
    }
}

fn t(x: &PyTensor) -> botnet_ids::Tensor {
    x.0.clone()
}

/// `[B, C_in, L]` convolved with `[C_out, C_in, K]` kernels.
#[pyfunction]
#[pyo3(signature = (x, kernels, bias, stride=1, padding="same"))]
fn conv1d(x: &PyTensor, kernels: &PyTensor, bias: &PyTensor, stride: usize, padding: &str) -> PyResult<PyTensor> {
    let padding: Padding = padding.parse().py()?;
    let p = ConvParams::new(t(kernels), t(bias), stride, padding).py()?;
    Ok(PyTensor(ops::conv1d_forward(&x.0, &p).py()?.0))
}

#[pyfunction]
#[pyo3(signature = (x, pool=2, stride=2))]
fn maxpool1d(x: &PyTensor, pool: usize, stride: usize) -> PyResult<PyTensor> {
    Ok(PyTensor(ops::maxpool1d(&x.0, pool, stride).py()?.0))
}

/// `x @ weight + bias` for `x` of shape `[B, in]`.
#[pyfunction]
fn dense(x: &PyTensor, weight: &PyTensor, bias: &PyTensor) -> PyResult<PyTensor> {
    ops::dense(&x.0, &DenseParams { weight: t(weight), bias: t(bias) }).py().map(PyTensor)
}

#[pyfunction]
fn softmax(x: &PyTensor) -> PyTensor {
    PyTensor(ops::softmax(&x.0))
}

/// Bidirectional LSTM over `[T, D]` or `[B, T, D]`. Each direction takes
/// `(w_x [4H, D], w_h [4H, H], b [4H])` with gate blocks i, f, g, o.
#[pyfunction]
fn bilstm(x: &PyTensor, forward: (PyTensor, PyTensor, PyTensor), backward: (PyTensor, PyTensor, PyTensor)) -> PyResult<PyTensor> {
    let dir = |(w_x, w_h, b): (PyTensor, PyTensor, PyTensor)| LstmDirection { w_x: w_x.0, w_h: w_h.0, b: b.0 };
    let p = LstmParams { forward: dir(forward), backward: dir(backward) };
    Ok(PyTensor(bilstm_forward(&x.0, &p).py()?.h_seq))
}

/// Attention pooling over `[T, D]` or `[B, T, D]`; returns `(context, weights)`.
#[pyfunction]
fn attention(v: &PyTensor, w_a: &PyTensor, q: &PyTensor) -> PyResult<(PyTensor, PyTensor)> {
    let out = attention_forward(&v.0, &AttentionParams { w_a: t(w_a), q: t(q) }).py()?;
    Ok((PyTensor(out.context), PyTensor(out.weights)))
}

/// Train loss, train accuracy, validation loss, validation accuracy, best epoch.
type FitCurves = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize);

/// The full network, with the scaler and class names of its checkpoint.
#[pyclass(name = "Model", module = "botnet_ids")]
struct PyModel {
    params: ModelParams,
    scaler: Option<MinMaxScaler>,
    vocab: Option<LabelVocab>,
}

fn parse_config(json: Option<&str>) -> PyResult<ModelConfig> {
    match json {
        None => Ok(ModelConfig::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("model config: {e}"))),
    }
}

#[pymethods]
impl PyModel {
    /// Fresh Glorot-initialized network. `config` is a JSON object of
    /// model settings; omitted means the published architecture.
    #[new]
    #[pyo3(signature = (config=None, seed=42))]
    fn new(config: Option<&str>, seed: u64) -> PyResult<Self> {
        let params = build_model(&parse_config(config)?, seed).py()?;
        Ok(PyModel { params, scaler: None, vocab: None })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let c = load_checkpoint(&path).py()?;
        Ok(PyModel { params: c.params, scaler: Some(c.scaler), vocab: Some(c.vocab) })
    }

    /// Write a checkpoint. Models that never saw a scaler store the identity
    /// range `[0, 1]`.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let cfg = &self.params.config;
        let width = cfg.input_channels * cfg.input_len;
        let scaler = self.scaler.clone().unwrap_or(MinMaxScaler { min: vec![0.0; width], max: vec![1.0; width] });
        let vocab = match &self.vocab {
            Some(v) => v.clone(),
            None if cfg.n_classes == 10 => LabelVocab::nbaiot(),
            None => LabelVocab::new((0..cfg.n_classes).map(|k| format!("class_{k}")).collect()).py()?,
        };
        save_checkpoint(&self.params, &scaler, &vocab, &path).py()
    }

    #[getter]
    fn config(&self) -> String {
        serde_json::to_string(&self.params.config).expect("config serializes")
    }

    #[getter]
    fn class_names(&self) -> Option<Vec<String>> {
        self.vocab.as_ref().map(|v| v.names().to_vec())
    }

    fn trainable_count(&self) -> usize {
        self.params.trainable_count()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.params.named().into_iter().map(|n| n.name).collect()
    }

    fn parameter(&self, name: &str) -> PyResult<PyTensor> {
        self.params.get(name).cloned().map(PyTensor).ok_or_else(|| PyValueError::new_err(format!("no parameter {name:?}")))
    }

    /// Min-max scale raw feature rows with the checkpoint's scaler.
    fn scale(&self, rows: Vec<f64>) -> PyResult<Vec<f64>> {
        match &self.scaler {
            Some(s) => s.transform(&rows).py(),
            None => Err(PyValueError::new_err("model has no scaler")),
        }
    }

    /// Inference-mode class probabilities `[N, n_classes]` for `[N, C, L]`.
    #[pyo3(signature = (x, chunk=256))]
    fn predict_proba(&self, py: Python<'_>, x: &PyTensor, chunk: usize) -> PyResult<PyTensor> {
        py.detach(|| self.params.predict_proba(&x.0, chunk)).py().map(PyTensor)
    }

    /// `(mean cross-entropy, accuracy, predictions)`.
    fn evaluate(&self, py: Python<'_>, x: &PyTensor, labels: Vec<usize>) -> PyResult<(f64, f64, Vec<usize>)> {
        let e = py.detach(|| evaluate(&self.params, &x.0, &labels)).py()?;
        Ok((e.loss, e.accuracy, e.predictions))
    }

    /// Train on row-major `x` (`[N, C·L]`), keeping the best-validation
    /// parameters. Returns the epoch curves and the best epoch.
    #[pyo3(signature = (x, labels, epochs=50, batch_size=128, learning_rate=0.001, patience=5, validation_fraction=0.1, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        py: Python<'_>,
        x: Vec<f64>,
        labels: Vec<usize>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        patience: usize,
        validation_fraction: f64,
        seed: u64,
    ) -> PyResult<FitCurves> {
        let cfg = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            early_stop_patience: patience,
            validation_fraction,
            seed,
            ..TrainConfig::default()
        };
        let params = self.params.clone();
        let out = py.detach(|| fit(params, &x, &labels, &cfg)).py()?;
        self.params = out.params;
        let c = out.curves;
        Ok((c.train_loss, c.train_accuracy, c.val_loss, c.val_accuracy, out.best_epoch))
    }
}

/// Row = truth, column = prediction.
#[pyfunction]
fn confusion_matrix(y_true: Vec<usize>, y_pred: Vec<usize>, n_classes: usize) -> PyResult<Vec<Vec<u64>>> {
    let cm = metrics::confusion(&y_true, &y_pred, n_classes).py()?;
    Ok(cm.counts().chunks(n_classes).map(<[u64]>::to_vec).collect())
}

fn matrix(counts: Vec<Vec<u64>>) -> PyResult<metrics::ConfusionMatrix> {
    let n = counts.len();
    if counts.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("confusion matrix must be square"));
    }
    metrics::ConfusionMatrix::from_counts(n, counts.concat()).py()
}

#[pyfunction]
fn cohen_kappa(counts: Vec<Vec<u64>>) -> PyResult<f64> {
    metrics::cohen_kappa(&matrix(counts)?).py()
}

#[pyfunction]
fn mcc(counts: Vec<Vec<u64>>) -> PyResult<f64> {
    metrics::mcc(&matrix(counts)?).py()
}

/// `(precision, recall, f1, accuracy)` of one class against the rest.
#[pyfunction]
fn class_scores(counts: Vec<Vec<u64>>, class: usize) -> PyResult<(f64, f64, f64, f64)> {
    let m = metrics::eq_metrics(&matrix(counts)?, class).py()?;
    Ok((m.precision, m.recall, m.f1, m.accuracy))
}

/// `(fpr, tpr, auc)` with tied scores collapsed into one point.
#[pyfunction]
fn roc_curve(scores: Vec<f64>, truths: Vec<bool>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let r = metrics::roc_curve(&scores, &truths).py()?;
    Ok((r.fpr, r.tpr, r.auc))
}

/// Classification report as `text`, `csv` or `json`.
#[pyfunction]
#[pyo3(signature = (counts, format="text"))]
fn classification_report(counts: Vec<Vec<u64>>, format: &str) -> PyResult<String> {
    let format = match format {
        "text" => ReportFormat::Text,
        "csv" => ReportFormat::Csv,
        "json" => ReportFormat::Json,
        other => return Err(PyValueError::new_err(format!("unknown report format {other:?}"))),
    };
    let report = metrics::classification_report(&matrix(counts)?).py()?;
    Ok(metrics::render_report(&report, format))
}

/// Seeded Gaussian blobs with 115 features; returns `(rows, labels)` with
/// rows flattened row-major.
#[pyfunction]
#[pyo3(signature = (n_classes=10, per_class=500, separation=4.0, sigma=1.0, seed=7))]
fn gaussian_blobs(n_classes: usize, per_class: usize, separation: f64, sigma: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let table = blobs(&BlobSpec { n_classes, per_class, separation, sigma, seed }).py()?;
    Ok((table.features, table.labels))
}

#[pyfunction]
fn default_config() -> String {
    serde_json::to_string(&ModelConfig::default()).expect("config serializes")
}

#[pymodule]
#[pyo3(name = "botnet_ids")]
fn botnet_ids_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(conv1d, m)?)?;
    m.add_function(wrap_pyfunction!(maxpool1d, m)?)?;
    m.add_function(wrap_pyfunction!(dense, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(bilstm, m)?)?;
    m.add_function(wrap_pyfunction!(attention, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(mcc, m)?)?;
    m.add_function(wrap_pyfunction!(class_scores, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
