use super::config::ModelConfig;
use super::params::{Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::recurrent::{attention_backward, attention_forward, bilstm_backward, bilstm_forward, AttentionCtx, BiLstmCtx};
use crate::tensor::{
    activation, activation_backward, apply_mask, batchnorm1d, batchnorm1d_backward, conv1d_backward,
    conv1d_forward, dense, dense_backward, dropout, maxpool1d, maxpool1d_backward, softmax, sparse_ce_loss,
    BatchNormCtx, Conv1dCtx, DropoutState, Mode, PoolCtx, Tensor,
};

/// One dropout stream per dropout site, so masks are reproducible from the
/// training seed.
#[derive(Debug, Clone)]
pub struct Dropouts {
    pub conv: Vec<DropoutState>,
    pub dense: Vec<DropoutState>,
}

impl Dropouts {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let conv = (1..=cfg.conv_blocks.len())
            .map(|i| DropoutState::new(cfg.conv_dropout, seed, &format!("dropout/conv{i}")))
            .collect::<Result<_>>()?;
        let dense = (1..=cfg.dense_units.len())
            .map(|i| DropoutState::new(cfg.dense_dropout, seed, &format!("dropout/dense{i}")))
            .collect::<Result<_>>()?;
        Ok(Dropouts { conv, dense })
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    conv: Conv1dCtx,
    /// Input of the activation.
    pre_act: Tensor,
    bn: BatchNormCtx,
    pool: PoolCtx,
    mask: Option<Tensor>,
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Tensor,
    pre_act: Tensor,
    mask: Option<Tensor>,
}

#[derive(Debug, Clone)]
struct BackwardState {
    blocks: Vec<BlockCache>,
    lstm: BiLstmCtx,
    attention: AttentionCtx,
    dense: Vec<DenseCache>,
    head_input: Tensor,
}

/// Everything a forward pass produced. Only train-mode passes keep the
/// per-layer state needed by [`model_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    pub logits: Tensor,
    pub probs: Tensor,
    /// Per-sample `[C, L]` after each conv block.
    pub block_shapes: Vec<[usize; 2]>,
    /// Per-sample `[T, 2H]` of the BiLSTM output.
    pub sequence_shape: [usize; 2],
    /// Attention weights `[B, T]`.
    pub attention_weights: Tensor,
    state: Option<BackwardState>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.logits.shape()[0]
    }

    /// Batch statistics of each block's normalization, for running-stat
    /// updates after a train-mode pass.
    pub fn batchnorm_contexts(&self) -> Vec<&BatchNormCtx> {
        self.state
            .as_ref()
            .map(|s| s.blocks.iter().map(|b| &b.bn).collect())
            .unwrap_or_default()
    }
}

/// `[B, C, L] -> [B, L, C]` (and back with the arguments swapped).
fn swap_last_two(x: &[f64], b: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for n in 0..b {
        let src = &x[n * rows * cols..(n + 1) * rows * cols];
        let dst = &mut out[n * rows * cols..(n + 1) * rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                dst[j * rows + i] = src[i * cols + j];
            }
        }
    }
    out
}

/// Forward pass over `x: [B, input_channels, input_len]`. Train mode needs
/// the dropout streams; infer mode ignores them and is deterministic.
pub fn model_forward(p: &ModelParams, x: &Tensor, mode: Mode, mut drops: Option<&mut Dropouts>) -> Result<ForwardCache> {
    let cfg = &p.config;
    let (b, c, l) = x.dims3()?;
    if c != cfg.input_channels || l != cfg.input_len {
        return Err(Error::Shape(format!(
            "model expects input [B, {}, {}], got {:?}",
            cfg.input_channels,
            cfg.input_len,
            x.shape()
        )));
    }
    if mode == Mode::Train && drops.is_none() {
        return Err(Error::Usage("train-mode forward needs dropout streams".into()));
    }
    let keep = mode == Mode::Train;
    let act = cfg.activation;

    let mut h = x.clone();
    let mut block_caches = Vec::new();
    let mut block_shapes = Vec::new();
    for (i, blk) in p.blocks.iter().enumerate() {
        let (conv_out, conv_ctx) = conv1d_forward(&h, &blk.conv)?;
        let (pre_act, normed, bn_ctx) = if cfg.bn_before_activation {
            let (bn_out, bn_ctx) = batchnorm1d(&conv_out, &blk.bn, mode)?;
            let a = activation(act, &bn_out);
            (bn_out, a, bn_ctx)
        } else {
            let a = activation(act, &conv_out);
            let (bn_out, bn_ctx) = batchnorm1d(&a, &blk.bn, mode)?;
            (conv_out, bn_out, bn_ctx)
        };
        let (pooled, pool_ctx) = maxpool1d(&normed, cfg.pool_size, cfg.pool_stride)?;
        let (out, mask) = match drops.as_deref_mut() {
            Some(d) if keep => {
                let st = &mut d.conv[i];
                let o = dropout(&pooled, st, mode);
                (o, st.mask.take())
            }
            _ => (pooled, None),
        };
        block_shapes.push([out.shape()[1], out.shape()[2]]);
        if keep {
            block_caches.push(BlockCache {
                conv: conv_ctx,
                pre_act,
                bn: bn_ctx,
                pool: pool_ctx,
                mask,
            });
        }
        h = out;
    }

    let (_, ch, steps) = h.dims3()?;
    let seq = Tensor::new(vec![b, steps, ch], swap_last_two(h.data(), b, ch, steps))?;
    let lstm = bilstm_forward(&seq, &p.bilstm)?;
    let sequence_shape = [steps, lstm.h_seq.shape()[2]];
    let att = attention_forward(&lstm.h_seq, &p.attention)?;

    let mut z = att.context;
    let mut dense_caches = Vec::new();
    for (i, layer) in p.dense.iter().enumerate() {
        let pre = dense(&z, layer)?;
        let a = activation(act, &pre);
        let (out, mask) = match drops.as_deref_mut() {
            Some(d) if keep => {
                let st = &mut d.dense[i];
                let o = dropout(&a, st, mode);
                (o, st.mask.take())
            }
            _ => (a, None),
        };
        if keep {
            dense_caches.push(DenseCache {
                input: z,
                pre_act: pre,
                mask,
            });
        }
        z = out;
    }
    let logits = dense(&z, &p.head)?;
    let probs = softmax(&logits);
    let state = keep.then_some(BackwardState {
        blocks: block_caches,
        lstm: lstm.ctx,
        attention: att.ctx,
        dense: dense_caches,
        head_input: z,
    });
    Ok(ForwardCache {
        mode,
        logits,
        probs,
        block_shapes,
        sequence_shape,
        attention_weights: att.weights,
        state,
    })
}

/// Mean sparse cross-entropy of the cached logits and its parameter
/// gradients.
pub fn model_backward(p: &ModelParams, cache: &ForwardCache, labels: &[usize]) -> Result<(f64, Gradients)> {
    if cache.mode != Mode::Train {
        return Err(Error::Usage("backward requires a train-mode forward cache".into()));
    }
    let (loss, dlogits) = sparse_ce_loss(&cache.logits, labels)?;
    Ok((loss, model_backward_from_logits(p, cache, &dlogits)?))
}

/// Backpropagate an arbitrary cotangent of the logits.
pub fn model_backward_from_logits(p: &ModelParams, cache: &ForwardCache, dlogits: &Tensor) -> Result<Gradients> {
    let st = cache
        .state
        .as_ref()
        .ok_or_else(|| Error::Usage("backward requires a train-mode forward cache".into()))?;
    let cfg = &p.config;
    let act = cfg.activation;
    let mut grads = Vec::<(String, Tensor)>::new();

    let hg = dense_backward(&st.head_input, &p.head, dlogits)?;
    grads.push(("head.weight".into(), hg.dweight));
    grads.push(("head.bias".into(), hg.dbias));
    let mut dz = hg.dx;
    for (i, (layer, c)) in p.dense.iter().zip(&st.dense).enumerate().rev() {
        let d_act = apply_mask(&dz, c.mask.as_ref());
        let d_pre = activation_backward(act, &c.pre_act, &d_act)?;
        let g = dense_backward(&c.input, layer, &d_pre)?;
        grads.push((format!("dense{}.bias", i + 1), g.dbias));
        grads.push((format!("dense{}.weight", i + 1), g.dweight));
        dz = g.dx;
    }

    let ag = attention_backward(&st.attention, &p.attention, &dz)?;
    grads.push(("attention.q".into(), ag.dq));
    grads.push(("attention.w_a".into(), ag.dw_a));
    let (dseq, lg) = bilstm_backward(&st.lstm, &p.bilstm, &ag.dv)?;
    for (dir, g) in [("backward", lg.backward), ("forward", lg.forward)] {
        grads.push((format!("bilstm.{dir}.b"), g.b));
        grads.push((format!("bilstm.{dir}.w_h"), g.w_h));
        grads.push((format!("bilstm.{dir}.w_x"), g.w_x));
    }

    let (b, steps, ch) = dseq.dims3()?;
    let mut dh = Tensor::new(vec![b, ch, steps], swap_last_two(dseq.data(), b, steps, ch))?;
    for (i, (blk, c)) in p.blocks.iter().zip(&st.blocks).enumerate().rev() {
        let n = i + 1;
        let d_pool = apply_mask(&dh, c.mask.as_ref());
        let d_norm = maxpool1d_backward(&c.pool, &d_pool)?;
        let d_conv = if cfg.bn_before_activation {
            let d_bn = activation_backward(act, &c.pre_act, &d_norm)?;
            let g = batchnorm1d_backward(&c.bn, &blk.bn, &d_bn)?;
            grads.push((format!("bn{n}.beta"), g.dbeta));
            grads.push((format!("bn{n}.gamma"), g.dgamma));
            g.dx
        } else {
            let g = batchnorm1d_backward(&c.bn, &blk.bn, &d_norm)?;
            grads.push((format!("bn{n}.beta"), g.dbeta));
            grads.push((format!("bn{n}.gamma"), g.dgamma));
            activation_backward(act, &c.pre_act, &g.dx)?
        };
        let g = conv1d_backward(&c.conv, &blk.conv, &d_conv)?;
        grads.push((format!("conv{n}.bias"), g.dbias));
        grads.push((format!("conv{n}.kernel"), g.dkernels));
        dh = g.dx;
    }

    // reorder to parameter order
    let mut out = Gradients::default();
    for named in p.named().into_iter().filter(|n| n.trainable) {
        let pos = grads
            .iter()
            .position(|(k, _)| *k == named.name)
            .ok_or_else(|| Error::Internal(format!("no gradient produced for {}", named.name)))?;
        let (k, g) = grads.swap_remove(pos);
        out.insert(k, g);
    }
    Ok(out)
}

impl ModelParams {
    /// Fold the batch statistics of a train-mode pass into the running
    /// estimates of every batch-norm layer.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (blk, ctx) in self.blocks.iter_mut().zip(cache.batchnorm_contexts()) {
            blk.bn.update_running_stats(ctx);
        }
    }

    /// Inference-mode class probabilities, evaluated in chunks of `chunk`
    /// rows.
    pub fn predict_proba(&self, x: &Tensor, chunk: usize) -> Result<Tensor> {
        let (b, c, l) = x.dims3()?;
        let row = c * l;
        let mut probs = Vec::with_capacity(b * self.config.n_classes);
        for start in (0..b).step_by(chunk.max(1)) {
            let end = (start + chunk.max(1)).min(b);
            let xb = Tensor::new(vec![end - start, c, l], x.data()[start * row..end * row].to_vec())?;
            let out = model_forward(self, &xb, Mode::Infer, None)?;
            probs.extend_from_slice(out.probs.data());
        }
        Tensor::new(vec![b, self.config.n_classes], probs)
    }
}
