use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{gemm, glorot_uniform, sigmoid, Tensor};

/// Weights of one direction. Rows of `w_x`, `w_h` and `b` are four stacked
/// blocks of `hidden` rows each, in gate order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `[4H, input_dim]`
    pub w_x: Tensor,
    /// `[4H, H]`
    pub w_h: Tensor,
    /// `[4H]`
    pub b: Tensor,
}

impl LstmDirection {
    /// Glorot-uniform weights, zero biases except the forget block at 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w_x = glorot_uniform(&[4 * hidden, input_dim], input_dim, 4 * hidden, rng);
        let w_h = glorot_uniform(&[4 * hidden, hidden], hidden, 4 * hidden, rng);
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmDirection { w_x, w_h, b }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.shape()[1]
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if self.w_h.shape() != [4 * h, h] || self.w_x.shape()[0] != 4 * h || self.b.shape() != [4 * h] {
            return Err(Error::Shape(format!(
                "inconsistent LSTM weights: w_x {:?}, w_h {:?}, b {:?}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl LstmParams {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let forward = LstmDirection::init(input_dim, hidden, rng);
        let backward = LstmDirection::init(input_dim, hidden, rng);
        LstmParams { forward, backward }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    /// Same parameters with the two directions exchanged.
    pub fn swapped(&self) -> Self {
        LstmParams {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.forward.validate()?;
        self.backward.validate()?;
        if self.forward.hidden() != self.backward.hidden() || self.forward.input_dim() != self.backward.input_dim() {
            return Err(Error::Shape("forward and backward LSTM directions disagree in shape".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DirectionGrads {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub forward: DirectionGrads,
    pub backward: DirectionGrads,
}

/// Per-direction activations, time-major: index `[t][b][..]`.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// Activated gates i, f, g, o: `[T, B, 4H]`.
    gates: Vec<f64>,
    /// Cell states `[T, B, H]`.
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Forward context for [`bilstm_backward`].
#[derive(Debug, Clone)]
pub struct BiLstmCtx {
    batch: Option<usize>,
    steps: usize,
    /// Input, time-major `[T, B, D]`.
    x_tm: Vec<f64>,
    fwd: DirectionCache,
    bwd: DirectionCache,
}

pub struct BiLstmOutput {
    /// `[T, 2H]` (or `[B, T, 2H]`): row t is the forward state at t followed by
    /// the backward state at t.
    pub h_seq: Tensor,
    pub ctx: BiLstmCtx,
}

/// One time step for a batch: `gates_pre` holds `x W_xᵀ + b` on entry and the
/// activated gates on exit.
fn step(
    gates: &mut [f64],
    h_prev: Option<&[f64]>,
    c_prev: Option<&[f64]>,
    w_h: &[f64],
    batch: usize,
    hidden: usize,
    c_out: &mut [f64],
    tanh_out: &mut [f64],
    h_out: &mut [f64],
) {
    if let Some(h_prev) = h_prev {
        gemm(false, true, batch, 4 * hidden, hidden, 1.0, h_prev, w_h, 1.0, gates);
    }
    for n in 0..batch {
        let g = &mut gates[n * 4 * hidden..(n + 1) * 4 * hidden];
        for j in 0..hidden {
            let i_gate = sigmoid(g[j]);
            let f_gate = sigmoid(g[hidden + j]);
            let g_gate = g[2 * hidden + j].tanh();
            let o_gate = sigmoid(g[3 * hidden + j]);
            g[j] = i_gate;
            g[hidden + j] = f_gate;
            g[2 * hidden + j] = g_gate;
            g[3 * hidden + j] = o_gate;
            let cp = c_prev.map_or(0.0, |c| c[n * hidden + j]);
            let c = f_gate * cp + i_gate * g_gate;
            let tc = c.tanh();
            c_out[n * hidden + j] = c;
            tanh_out[n * hidden + j] = tc;
            h_out[n * hidden + j] = o_gate * tc;
        }
    }
}

fn run_direction(x_tm: &[f64], steps: usize, batch: usize, p: &LstmDirection, reverse: bool) -> DirectionCache {
    let hidden = p.hidden();
    let d = p.input_dim();
    let g4 = 4 * hidden;
    let rows = steps * batch;
    let mut gates: Vec<f64> = p.b.data().repeat(rows);
    gemm(false, true, rows, g4, d, 1.0, x_tm, p.w_x.data(), 1.0, &mut gates);

    let mut c = vec![0.0; rows * hidden];
    let mut tanh_c = vec![0.0; rows * hidden];
    let mut h = vec![0.0; rows * hidden];
    let bh = batch * hidden;
    let mut prev: Option<usize> = None;
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        let (h_prev, c_prev) = match prev {
            Some(tp) => (Some(h[tp * bh..(tp + 1) * bh].to_vec()), Some(c[tp * bh..(tp + 1) * bh].to_vec())),
            None => (None, None),
        };
        step(
            &mut gates[t * batch * g4..(t + 1) * batch * g4],
            h_prev.as_deref(),
            c_prev.as_deref(),
            p.w_h.data(),
            batch,
            hidden,
            &mut c[t * bh..(t + 1) * bh],
            &mut tanh_c[t * bh..(t + 1) * bh],
            &mut h[t * bh..(t + 1) * bh],
        );
        prev = Some(t);
    }
    DirectionCache { gates, c, tanh_c, h }
}

/// BPTT through one direction. `dh_out` is the time-major `[T, B, H]`
/// cotangent of the emitted states. Returns `(dx_tm, grads)`.
fn backprop_direction(
    cache: &DirectionCache,
    x_tm: &[f64],
    dh_out: &[f64],
    steps: usize,
    batch: usize,
    p: &LstmDirection,
    reverse: bool,
) -> (Vec<f64>, DirectionGrads) {
    let hidden = p.hidden();
    let d = p.input_dim();
    let g4 = 4 * hidden;
    let bh = batch * hidden;
    let rows = steps * batch;
    let mut dpre = vec![0.0; rows * g4];
    let mut dw_h = vec![0.0; g4 * hidden];
    let mut dh_next = vec![0.0; bh];
    let mut dc_next = vec![0.0; bh];

    for s in (0..steps).rev() {
        let t = if reverse { steps - 1 - s } else { s };
        let prev = if s == 0 { None } else { Some(if reverse { t + 1 } else { t - 1 }) };
        let gates = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
        let dp = &mut dpre[t * batch * g4..(t + 1) * batch * g4];
        for n in 0..batch {
            for j in 0..hidden {
                let k = n * hidden + j;
                let gi = gates[n * g4 + j];
                let gf = gates[n * g4 + hidden + j];
                let gg = gates[n * g4 + 2 * hidden + j];
                let go = gates[n * g4 + 3 * hidden + j];
                let tc = cache.tanh_c[t * bh + k];
                let dh = dh_out[t * bh + k] + dh_next[k];
                let dc = dc_next[k] + dh * go * (1.0 - tc * tc);
                let cp = prev.map_or(0.0, |tp| cache.c[tp * bh + k]);
                dp[n * g4 + j] = dc * gg * gi * (1.0 - gi);
                dp[n * g4 + hidden + j] = dc * cp * gf * (1.0 - gf);
                dp[n * g4 + 2 * hidden + j] = dc * gi * (1.0 - gg * gg);
                dp[n * g4 + 3 * hidden + j] = dh * tc * go * (1.0 - go);
                dc_next[k] = dc * gf;
            }
        }
        match prev {
            Some(tp) => {
                let h_prev = &cache.h[tp * bh..(tp + 1) * bh];
                gemm(true, false, g4, hidden, batch, 1.0, dp, h_prev, 1.0, &mut dw_h);
                gemm(false, false, batch, hidden, g4, 1.0, dp, p.w_h.data(), 0.0, &mut dh_next);
            }
            None => dh_next.fill(0.0),
        }
    }

    let mut dw_x = vec![0.0; g4 * d];
    gemm(true, false, g4, d, rows, 1.0, &dpre, x_tm, 0.0, &mut dw_x);
    let mut db = vec![0.0; g4];
    for row in dpre.chunks_exact(g4) {
        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let mut dx = vec![0.0; rows * d];
    gemm(false, false, rows, d, g4, 1.0, &dpre, p.w_x.data(), 0.0, &mut dx);
    (
        dx,
        DirectionGrads {
            w_x: Tensor::new(vec![g4, d], dw_x).unwrap(),
            w_h: Tensor::new(vec![g4, hidden], dw_h).unwrap(),
            b: Tensor::new(vec![g4], db).unwrap(),
        },
    )
}

/// Values of one [`lstm_cell_forward`] step needed by its backward pass.
#[derive(Debug, Clone)]
pub struct LstmCellCtx {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates i, f, g, o.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCellGrads {
    pub dx: Tensor,
    pub dh_prev: Tensor,
    pub dc_prev: Tensor,
    pub params: DirectionGrads,
}

/// Single LSTM step for one sample, keeping the context for
/// [`lstm_cell_backward`].
pub fn lstm_cell_forward(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    p: &LstmDirection,
) -> Result<(Tensor, Tensor, LstmCellCtx)> {
    p.validate()?;
    let hidden = p.hidden();
    if x_t.shape() != [p.input_dim()] || h_prev.shape() != [hidden] || c_prev.shape() != [hidden] {
        return Err(Error::Dimension {
            op: "lstm_cell",
            lhs: x_t.shape().to_vec(),
            rhs: p.w_x.shape().to_vec(),
        });
    }
    let mut gates = p.b.data().to_vec();
    gemm(false, true, 1, 4 * hidden, p.input_dim(), 1.0, x_t.data(), p.w_x.data(), 1.0, &mut gates);
    let mut c = vec![0.0; hidden];
    let mut tc = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    step(
        &mut gates,
        Some(h_prev.data()),
        Some(c_prev.data()),
        p.w_h.data(),
        1,
        hidden,
        &mut c,
        &mut tc,
        &mut h,
    );
    let ctx = LstmCellCtx {
        x: x_t.data().to_vec(),
        h_prev: h_prev.data().to_vec(),
        c_prev: c_prev.data().to_vec(),
        gates,
        tanh_c: tc,
    };
    Ok((Tensor::vector(h)?, Tensor::vector(c)?, ctx))
}

/// Single LSTM step for one sample.
pub fn lstm_cell(x_t: &Tensor, h_prev: &Tensor, c_prev: &Tensor, p: &LstmDirection) -> Result<(Tensor, Tensor)> {
    let (h, c, _) = lstm_cell_forward(x_t, h_prev, c_prev, p)?;
    Ok((h, c))
}

/// Adjoint of one cell step given cotangents of `h_t` and `c_t`.
pub fn lstm_cell_backward(ctx: &LstmCellCtx, p: &LstmDirection, dh: &Tensor, dc: &Tensor) -> Result<LstmCellGrads> {
    let hidden = p.hidden();
    let d = p.input_dim();
    if dh.shape() != [hidden] || dc.shape() != [hidden] || ctx.x.len() != d {
        return Err(Error::Dimension { op: "lstm_cell_backward", lhs: dh.shape().to_vec(), rhs: vec![hidden] });
    }
    let g = &ctx.gates;
    let mut dpre = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for j in 0..hidden {
        let (i, f, gg, o) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
        let tc = ctx.tanh_c[j];
        let dct = dc.data()[j] + dh.data()[j] * o * (1.0 - tc * tc);
        dpre[j] = dct * gg * i * (1.0 - i);
        dpre[hidden + j] = dct * ctx.c_prev[j] * f * (1.0 - f);
        dpre[2 * hidden + j] = dct * i * (1.0 - gg * gg);
        dpre[3 * hidden + j] = dh.data()[j] * tc * o * (1.0 - o);
        dc_prev[j] = dct * f;
    }
    let mut w_x = vec![0.0; 4 * hidden * d];
    gemm(false, false, 4 * hidden, d, 1, 1.0, &dpre, &ctx.x, 0.0, &mut w_x);
    let mut w_h = vec![0.0; 4 * hidden * hidden];
    gemm(false, false, 4 * hidden, hidden, 1, 1.0, &dpre, &ctx.h_prev, 0.0, &mut w_h);
    let mut dx = vec![0.0; d];
    gemm(false, false, 1, d, 4 * hidden, 1.0, &dpre, p.w_x.data(), 0.0, &mut dx);
    let mut dh_prev = vec![0.0; hidden];
    gemm(false, false, 1, hidden, 4 * hidden, 1.0, &dpre, p.w_h.data(), 0.0, &mut dh_prev);
    Ok(LstmCellGrads {
        dx: Tensor::vector(dx)?,
        dh_prev: Tensor::vector(dh_prev)?,
        dc_prev: Tensor::vector(dc_prev)?,
        params: DirectionGrads {
            w_x: Tensor::new(vec![4 * hidden, d], w_x)?,
            w_h: Tensor::new(vec![4 * hidden, hidden], w_h)?,
            b: Tensor::vector(dpre)?,
        },
    })
}

/// Bidirectional pass over `[T, D]` or a batch `[B, T, D]`, zero initial
/// states in both directions.
pub fn bilstm_forward(x_seq: &Tensor, p: &LstmParams) -> Result<BiLstmOutput> {
    p.validate()?;
    let (batch, steps, d) = match x_seq.shape() {
        &[t, d] => (None, t, d),
        &[b, t, d] => (Some(b), t, d),
        s => return Err(Error::Shape(format!("bilstm expects [T, D] or [B, T, D], got {s:?}"))),
    };
    if d != p.input_dim() {
        return Err(Error::Dimension {
            op: "bilstm_forward",
            lhs: x_seq.shape().to_vec(),
            rhs: p.forward.w_x.shape().to_vec(),
        });
    }
    let b = batch.unwrap_or(1);
    let hidden = p.hidden();
    let xd = x_seq.data();
    let mut x_tm = vec![0.0; xd.len()];
    for n in 0..b {
        for t in 0..steps {
            x_tm[(t * b + n) * d..(t * b + n + 1) * d].copy_from_slice(&xd[(n * steps + t) * d..(n * steps + t + 1) * d]);
        }
    }
    let fwd = run_direction(&x_tm, steps, b, &p.forward, false);
    let bwd = run_direction(&x_tm, steps, b, &p.backward, true);

    let mut out = vec![0.0; b * steps * 2 * hidden];
    for n in 0..b {
        for t in 0..steps {
            let dst = &mut out[(n * steps + t) * 2 * hidden..(n * steps + t + 1) * 2 * hidden];
            let src = (t * b + n) * hidden;
            dst[..hidden].copy_from_slice(&fwd.h[src..src + hidden]);
            dst[hidden..].copy_from_slice(&bwd.h[src..src + hidden]);
        }
    }
    let shape = match batch {
        Some(b) => vec![b, steps, 2 * hidden],
        None => vec![steps, 2 * hidden],
    };
    Ok(BiLstmOutput {
        h_seq: Tensor::new(shape, out)?,
        ctx: BiLstmCtx {
            batch,
            steps,
            x_tm,
            fwd,
            bwd,
        },
    })
}

/// Backpropagation through time for both directions.
pub fn bilstm_backward(ctx: &BiLstmCtx, p: &LstmParams, dh_seq: &Tensor) -> Result<(Tensor, LstmGrads)> {
    let b = ctx.batch.unwrap_or(1);
    let steps = ctx.steps;
    let hidden = p.hidden();
    let d = p.input_dim();
    if dh_seq.len() != b * steps * 2 * hidden {
        return Err(Error::Dimension {
            op: "bilstm_backward",
            lhs: vec![b, steps, 2 * hidden],
            rhs: dh_seq.shape().to_vec(),
        });
    }
    let gd = dh_seq.data();
    let mut dh_f = vec![0.0; steps * b * hidden];
    let mut dh_b = vec![0.0; steps * b * hidden];
    for n in 0..b {
        for t in 0..steps {
            let src = &gd[(n * steps + t) * 2 * hidden..(n * steps + t + 1) * 2 * hidden];
            let dst = (t * b + n) * hidden;
            dh_f[dst..dst + hidden].copy_from_slice(&src[..hidden]);
            dh_b[dst..dst + hidden].copy_from_slice(&src[hidden..]);
        }
    }
    let (dx_f, g_f) = backprop_direction(&ctx.fwd, &ctx.x_tm, &dh_f, steps, b, &p.forward, false);
    let (dx_b, g_b) = backprop_direction(&ctx.bwd, &ctx.x_tm, &dh_b, steps, b, &p.backward, true);

    let mut dx = vec![0.0; b * steps * d];
    for n in 0..b {
        for t in 0..steps {
            let src = (t * b + n) * d;
            let dst = &mut dx[(n * steps + t) * d..(n * steps + t + 1) * d];
            for j in 0..d {
                dst[j] = dx_f[src + j] + dx_b[src + j];
            }
        }
    }
    let shape = match ctx.batch {
        Some(b) => vec![b, steps, d],
        None => vec![steps, d],
    };
    Ok((
        Tensor::new(shape, dx)?,
        LstmGrads {
            forward: g_f,
            backward: g_b,
        },
    ))
}
