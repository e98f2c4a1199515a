use super::Tensor;
use crate::error::{Error, Result};

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Softmax along the last axis.
pub fn softmax(x: &Tensor) -> Tensor {
    let c = *x.shape().last().unwrap();
    let mut out = x.data().to_vec();
    out.chunks_exact_mut(c).for_each(softmax_in_place);
    Tensor::new(x.shape().to_vec(), out).unwrap()
}

/// Adjoint of softmax given its output `y`: `y ⊙ (dy − Σ y·dy)` per slice.
pub fn softmax_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if y.shape() != dy.shape() {
        return Err(Error::Dimension {
            op: "softmax_backward",
            lhs: y.shape().to_vec(),
            rhs: dy.shape().to_vec(),
        });
    }
    let c = *y.shape().last().unwrap();
    let mut out = vec![0.0; y.len()];
    for ((o, yr), gr) in out
        .chunks_exact_mut(c)
        .zip(y.data().chunks_exact(c))
        .zip(dy.data().chunks_exact(c))
    {
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((o, &yv), &gv) in o.iter_mut().zip(yr).zip(gr) {
            *o = yv * (gv - dot);
        }
    }
    Tensor::new(y.shape().to_vec(), out)
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`, with the
/// fused gradient `(softmax − onehot) / B`.
pub fn sparse_ce_loss(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (b, c) = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::Dimension {
            op: "sparse_ce_loss",
            lhs: logits.shape().to_vec(),
            rhs: vec![labels.len()],
        });
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
        return Err(Error::Label {
            row,
            label,
            n_classes: c,
        });
    }
    let mut grad = logits.data().to_vec();
    let mut loss = 0.0;
    for (row, &label) in grad.chunks_exact_mut(c).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        for v in row.iter_mut() {
            *v = (*v - lse).exp() / b as f64;
        }
        row[label] -= 1.0 / b as f64;
    }
    Ok((loss / b as f64, Tensor::new(vec![b, c], grad)?))
}
