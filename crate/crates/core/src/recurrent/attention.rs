use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{gemm, glorot_uniform, Tensor};

/// Key projection `w_a: [2H, d_k]` and the learned query `q: [d_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_a: Tensor,
    pub q: Tensor,
}

impl AttentionParams {
    pub fn init(value_dim: usize, key_dim: usize, rng: &mut impl Rng) -> Self {
        let w_a = glorot_uniform(&[value_dim, key_dim], value_dim, key_dim, rng);
        // the query is a [d_k, 1] projection in all but name
        let q = glorot_uniform(&[key_dim], key_dim, 1, rng);
        AttentionParams { w_a, q }
    }

    pub fn value_dim(&self) -> usize {
        self.w_a.shape()[0]
    }

    pub fn key_dim(&self) -> usize {
        self.w_a.shape()[1]
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCtx {
    batch: Option<usize>,
    steps: usize,
    values: Vec<f64>,
    /// `tanh(V W_a)`, `[B*T, d_k]`
    keys: Vec<f64>,
    /// Attention weights `[B, T]`.
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dv: Tensor,
    pub dw_a: Tensor,
    pub dq: Tensor,
}

pub struct AttentionOutput {
    /// Context vector `[2H]` (or `[B, 2H]`).
    pub context: Tensor,
    /// Weights over steps `[T]` (or `[B, T]`), each slice summing to 1.
    pub weights: Tensor,
    pub ctx: AttentionCtx,
}

/// `K = tanh(V W_a)`, `d = softmax(q Kᵀ)`, `a = d V` over `[T, 2H]` values or
/// a batch `[B, T, 2H]`. No `1/√d_k` scaling.
pub fn attention_forward(v: &Tensor, p: &AttentionParams) -> Result<AttentionOutput> {
    let (batch, steps, dv) = match v.shape() {
        &[t, d] => (None, t, d),
        &[b, t, d] => (Some(b), t, d),
        s => return Err(Error::Shape(format!("attention expects [T, 2H] or [B, T, 2H], got {s:?}"))),
    };
    let dk = p.key_dim();
    if dv != p.value_dim() || p.q.shape() != [dk] {
        return Err(Error::Dimension {
            op: "attention_forward",
            lhs: v.shape().to_vec(),
            rhs: p.w_a.shape().to_vec(),
        });
    }
    let b = batch.unwrap_or(1);
    let rows = b * steps;
    let vd = v.data();
    let mut keys = vec![0.0; rows * dk];
    gemm(false, false, rows, dk, dv, 1.0, vd, p.w_a.data(), 0.0, &mut keys);
    keys.iter_mut().for_each(|k| *k = k.tanh());

    let q = p.q.data();
    let mut weights: Vec<f64> = keys
        .chunks_exact(dk)
        .map(|k| k.iter().zip(q).map(|(a, b)| a * b).sum())
        .collect();
    weights.chunks_exact_mut(steps).for_each(crate::tensor::softmax_in_place);

    let mut context = vec![0.0; b * dv];
    for n in 0..b {
        let out = &mut context[n * dv..(n + 1) * dv];
        for t in 0..steps {
            let w = weights[n * steps + t];
            let row = &vd[(n * steps + t) * dv..(n * steps + t + 1) * dv];
            out.iter_mut().zip(row).for_each(|(o, x)| *o += w * x);
        }
    }
    let (cshape, wshape) = match batch {
        Some(b) => (vec![b, dv], vec![b, steps]),
        None => (vec![dv], vec![steps]),
    };
    Ok(AttentionOutput {
        context: Tensor::new(cshape, context)?,
        weights: Tensor::new(wshape, weights.clone())?,
        ctx: AttentionCtx {
            batch,
            steps,
            values: vd.to_vec(),
            keys,
            weights,
        },
    })
}

/// Adjoint of [`attention_forward`]. `dV` collects both the direct path
/// through `a = d V` and the path through the keys.
pub fn attention_backward(ctx: &AttentionCtx, p: &AttentionParams, da: &Tensor) -> Result<AttentionGrads> {
    let b = ctx.batch.unwrap_or(1);
    let steps = ctx.steps;
    let dv = p.value_dim();
    let dk = p.key_dim();
    if da.len() != b * dv {
        return Err(Error::Dimension {
            op: "attention_backward",
            lhs: vec![b, dv],
            rhs: da.shape().to_vec(),
        });
    }
    let rows = b * steps;
    let dad = da.data();
    let q = p.q.data();
    let mut dvals = vec![0.0; rows * dv];
    let mut dscore = vec![0.0; rows];
    for n in 0..b {
        let g = &dad[n * dv..(n + 1) * dv];
        let mut dd = vec![0.0; steps];
        for t in 0..steps {
            let r = n * steps + t;
            let w = ctx.weights[r];
            let row = &ctx.values[r * dv..(r + 1) * dv];
            dd[t] = row.iter().zip(g).map(|(a, b)| a * b).sum();
            dvals[r * dv..(r + 1) * dv].iter_mut().zip(g).for_each(|(o, gv)| *o = w * gv);
        }
        let mean: f64 = (0..steps).map(|t| ctx.weights[n * steps + t] * dd[t]).sum();
        for t in 0..steps {
            dscore[n * steps + t] = ctx.weights[n * steps + t] * (dd[t] - mean);
        }
    }
    let mut dq = vec![0.0; dk];
    let mut dz = vec![0.0; rows * dk];
    for r in 0..rows {
        let k = &ctx.keys[r * dk..(r + 1) * dk];
        let s = dscore[r];
        for j in 0..dk {
            dq[j] += s * k[j];
            dz[r * dk + j] = s * q[j] * (1.0 - k[j] * k[j]);
        }
    }
    let mut dw_a = vec![0.0; dv * dk];
    gemm(true, false, dv, dk, rows, 1.0, &ctx.values, &dz, 0.0, &mut dw_a);
    gemm(false, true, rows, dv, dk, 1.0, &dz, p.w_a.data(), 1.0, &mut dvals);
    let vshape = match ctx.batch {
        Some(b) => vec![b, steps, dv],
        None => vec![steps, dv],
    };
    Ok(AttentionGrads {
        dv: Tensor::new(vshape, dvals)?,
        dw_a: Tensor::new(vec![dv, dk], dw_a)?,
        dq: Tensor::vector(dq)?,
    })
}
