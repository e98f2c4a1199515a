use super::Tensor;
use crate::error::{Error, Result};

/// Output length of a max-pool with ceil semantics: a trailing partial window
/// is kept and pooled over its valid elements. Every window starts inside the
/// input.
pub fn pooled_len(len: usize, pool: usize, stride: usize) -> usize {
    ((len - pool).div_ceil(stride) + 1).min((len - 1) / stride + 1)
}

#[derive(Debug, Clone)]
pub struct PoolCtx {
    input_shape: Vec<usize>,
    /// Position along the length axis of each window's maximum.
    pub argmax: Vec<usize>,
}

/// Max-pool along the last axis of `[C, L]` or `[B, C, L]`. Ties resolve to
/// the lowest index.
pub fn maxpool1d(x: &Tensor, pool: usize, stride: usize) -> Result<(Tensor, PoolCtx)> {
    if pool == 0 || stride == 0 {
        return Err(Error::Config("pool size and stride must be positive".into()));
    }
    let (rows, len) = match x.shape() {
        &[c, l] => (c, l),
        &[b, c, l] => (b * c, l),
        s => return Err(Error::Shape(format!("maxpool1d expects [C, L] or [B, C, L], got {s:?}"))),
    };
    if pool > len {
        return Err(Error::Shape(format!("pool {pool} exceeds sequence length {len}")));
    }
    let out_len = pooled_len(len, pool, stride);
    let mut out = Vec::with_capacity(rows * out_len);
    let mut argmax = Vec::with_capacity(rows * out_len);
    for row in x.data().chunks_exact(len) {
        for t in 0..out_len {
            let start = t * stride;
            let end = (start + pool).min(len);
            let mut best = start;
            for i in start + 1..end {
                if row[i] > row[best] {
                    best = i;
                }
            }
            out.push(row[best]);
            argmax.push(best);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = out_len;
    Ok((
        Tensor::new(shape, out)?,
        PoolCtx {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each output gradient to the recorded argmax; every other input
/// position receives exactly zero.
pub fn maxpool1d_backward(ctx: &PoolCtx, dy: &Tensor) -> Result<Tensor> {
    if dy.len() != ctx.argmax.len() {
        return Err(Error::Dimension {
            op: "maxpool1d_backward",
            lhs: vec![ctx.argmax.len()],
            rhs: dy.shape().to_vec(),
        });
    }
    let len = *ctx.input_shape.last().unwrap();
    let out_len = *dy.shape().last().unwrap();
    let mut dx = vec![0.0; ctx.input_shape.iter().product()];
    for (w, (&g, &idx)) in dy.data().iter().zip(&ctx.argmax).enumerate() {
        dx[(w / out_len) * len + idx] += g;
    }
    Tensor::new(ctx.input_shape.clone(), dx)
}
