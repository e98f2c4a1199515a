use super::{Mode, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_BN_EPSILON: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization state.
///
/// The running statistics are a zero-initialized exponential moving average
/// of the batch statistics with bias correction: after `t` updates they hold
/// `Σ_k (1 − m) m^(t−k) s_k / (1 − m^t)`. The first update therefore stores
/// the batch statistics themselves, and the initial `(0, 1)` only applies
/// before any training. The running variance tracks the unbiased batch
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    /// Number of folded batches, as a one-element tensor.
    pub updates: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormParams {
    pub fn new(channels: usize) -> Self {
        BatchNormParams {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            updates: Tensor::zeros(&[1]),
            momentum: DEFAULT_BN_MOMENTUM,
            epsilon: DEFAULT_BN_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Fold the batch statistics of a train-mode forward into the running
    /// estimates. No-op for an infer-mode context.
    pub fn update_running_stats(&mut self, ctx: &BatchNormCtx) {
        if ctx.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        let t = self.updates.data()[0] + 1.0;
        self.updates.data_mut()[0] = t;
        let keep = m * (1.0 - m.powf(t - 1.0)) / (1.0 - m.powf(t));
        let take = (1.0 - m) / (1.0 - m.powf(t));
        let n = ctx.count as f64;
        let unbias = n / (n - 1.0);
        for c in 0..self.channels() {
            let rm = &mut self.running_mean.data_mut()[c];
            *rm = keep * *rm + take * ctx.mean[c];
            let rv = &mut self.running_var.data_mut()[c];
            *rv = keep * *rv + take * ctx.var[c] * unbias;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCtx {
    mode: Mode,
    shape: Vec<usize>,
    count: usize,
    /// Batch mean (train) or running mean (infer).
    pub mean: Vec<f64>,
    /// Biased batch variance (train) or running variance (infer).
    pub var: Vec<f64>,
    inv_std: Vec<f64>,
    x_hat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub dx: Tensor,
    pub dgamma: Tensor,
    pub dbeta: Tensor,
}

/// Normalize `[B, C, L]` per channel over batch and length.
pub fn batchnorm1d(x: &Tensor, p: &BatchNormParams, mode: Mode) -> Result<(Tensor, BatchNormCtx)> {
    let (b, c, l) = x.dims3()?;
    if c != p.channels() {
        return Err(Error::Dimension {
            op: "batchnorm1d",
            lhs: x.shape().to_vec(),
            rhs: p.gamma.shape().to_vec(),
        });
    }
    let count = b * l;
    let xd = x.data();
    let (mean, var) = match mode {
        Mode::Train => {
            if count < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batch statistics need at least 2 values per channel, got {count}"
                )));
            }
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut s = 0.0;
                for n in 0..b {
                    s += xd[(n * c + ch) * l..(n * c + ch + 1) * l].iter().sum::<f64>();
                }
                let mu = s / count as f64;
                let mut ss = 0.0;
                for n in 0..b {
                    ss += xd[(n * c + ch) * l..(n * c + ch + 1) * l]
                        .iter()
                        .map(|v| (v - mu) * (v - mu))
                        .sum::<f64>();
                }
                mean[ch] = mu;
                var[ch] = ss / count as f64;
            }
            (mean, var)
        }
        Mode::Infer => (p.running_mean.data().to_vec(), p.running_var.data().to_vec()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + p.epsilon).sqrt()).collect();
    let gamma = p.gamma.data();
    let beta = p.beta.data();
    let mut x_hat = vec![0.0; xd.len()];
    let mut out = vec![0.0; xd.len()];
    for n in 0..b {
        for ch in 0..c {
            let base = (n * c + ch) * l;
            for t in base..base + l {
                let h = (xd[t] - mean[ch]) * inv_std[ch];
                x_hat[t] = h;
                out[t] = gamma[ch] * h + beta[ch];
            }
        }
    }
    let ctx = BatchNormCtx {
        mode,
        shape: x.shape().to_vec(),
        count,
        mean,
        var,
        inv_std,
        x_hat,
    };
    Ok((Tensor::new(x.shape().to_vec(), out)?, ctx))
}

/// Adjoint of [`batchnorm1d`]. In train mode the gradient flows through the
/// batch mean and variance as well as the direct path.
pub fn batchnorm1d_backward(ctx: &BatchNormCtx, p: &BatchNormParams, dy: &Tensor) -> Result<BatchNormGrads> {
    if dy.shape() != ctx.shape.as_slice() {
        return Err(Error::Dimension {
            op: "batchnorm1d_backward",
            lhs: ctx.shape.clone(),
            rhs: dy.shape().to_vec(),
        });
    }
    let (b, c, l) = (ctx.shape[0], ctx.shape[1], ctx.shape[2]);
    let dyd = dy.data();
    let gamma = p.gamma.data();
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for n in 0..b {
        for ch in 0..c {
            let base = (n * c + ch) * l;
            for t in base..base + l {
                dgamma[ch] += dyd[t] * ctx.x_hat[t];
                dbeta[ch] += dyd[t];
            }
        }
    }
    let mut dx = vec![0.0; dyd.len()];
    let nf = ctx.count as f64;
    for ch in 0..c {
        let scale = gamma[ch] * ctx.inv_std[ch];
        // sum(dx_hat) = gamma * dbeta, sum(dx_hat * x_hat) = gamma * dgamma
        let (mean_term, proj_term) = match ctx.mode {
            Mode::Train => (dbeta[ch] / nf, dgamma[ch] / nf),
            Mode::Infer => (0.0, 0.0),
        };
        for n in 0..b {
            let base = (n * c + ch) * l;
            for t in base..base + l {
                dx[t] = scale * (dyd[t] - mean_term - ctx.x_hat[t] * proj_term);
            }
        }
    }
    Ok(BatchNormGrads {
        dx: Tensor::new(ctx.shape.clone(), dx)?,
        dgamma: Tensor::new(vec![c], dgamma)?,
        dbeta: Tensor::new(vec![c], dbeta)?,
    })
}
