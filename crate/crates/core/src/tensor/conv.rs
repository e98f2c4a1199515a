use serde::{Deserialize, Serialize};

use super::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

impl std::str::FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Padding::Valid),
            "same" => Ok(Padding::Same),
            other => Err(Error::Config(format!("unknown padding mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Padding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        })
    }
}

/// Kernels `[out_channels, in_channels, kernel_size]` plus per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvParams {
    pub fn new(kernels: Tensor, bias: Tensor, stride: usize, padding: Padding) -> Result<Self> {
        let (out_ch, _, _) = kernels.dims3()?;
        if bias.shape() != [out_ch] {
            return Err(Error::Dimension {
                op: "conv1d bias",
                lhs: kernels.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::Config("conv stride must be positive".into()));
        }
        Ok(ConvParams {
            kernels,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[2]
    }

    /// `(output_length, left_padding)` for an input of length `len`.
    pub fn output_geometry(&self, len: usize) -> Result<(usize, usize)> {
        let k = self.kernel_size();
        let s = self.stride;
        match self.padding {
            Padding::Valid => {
                if len < k {
                    return Err(Error::Shape(format!(
                        "input length {len} shorter than kernel {k} under valid padding"
                    )));
                }
                Ok(((len - k) / s + 1, 0))
            }
            Padding::Same => {
                let out = len.div_ceil(s);
                let total = ((out - 1) * s + k).saturating_sub(len);
                Ok((out, total / 2))
            }
        }
    }
}

/// Saved forward state: the unfolded input patches and geometry.
#[derive(Debug, Clone)]
pub struct Conv1dCtx {
    batch: Option<usize>,
    in_len: usize,
    out_len: usize,
    pad_left: usize,
    /// `[in_channels * kernel_size, batch * out_len]`
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dkernels: Tensor,
    pub dbias: Tensor,
}

/// One-dimensional convolution (cross-correlation) over `[C, L]` or a batch
/// `[B, C, L]`. No activation is applied.
pub fn conv1d_forward(x: &Tensor, p: &ConvParams) -> Result<(Tensor, Conv1dCtx)> {
    let (batch, channels, len) = match x.shape() {
        &[c, l] => (None, c, l),
        &[b, c, l] => (Some(b), c, l),
        s => return Err(Error::Shape(format!("conv1d expects [C, L] or [B, C, L], got {s:?}"))),
    };
    if channels != p.in_channels() {
        return Err(Error::Dimension {
            op: "conv1d",
            lhs: x.shape().to_vec(),
            rhs: p.kernels.shape().to_vec(),
        });
    }
    let b = batch.unwrap_or(1);
    let k = p.kernel_size();
    let (out_len, pad_left) = p.output_geometry(len)?;
    let rows = channels * k;
    let ncols = b * out_len;
    let xd = x.data();

    let mut cols = vec![0.0; rows * ncols];
    for i in 0..channels {
        for tau in 0..k {
            let row = &mut cols[(i * k + tau) * ncols..(i * k + tau + 1) * ncols];
            for s in 0..b {
                let src = &xd[(s * channels + i) * len..(s * channels + i + 1) * len];
                for t in 0..out_len {
                    let pos = (t * p.stride + tau) as isize - pad_left as isize;
                    if pos >= 0 && (pos as usize) < len {
                        row[s * out_len + t] = src[pos as usize];
                    }
                }
            }
        }
    }

    let out_ch = p.out_channels();
    let mut y = vec![0.0; out_ch * ncols];
    gemm(false, false, out_ch, ncols, rows, 1.0, p.kernels.data(), &cols, 0.0, &mut y);

    // [out, B*L_out] -> [B, out, L_out] with bias
    let mut out = vec![0.0; out_ch * ncols];
    let bias = p.bias.data();
    for j in 0..out_ch {
        for s in 0..b {
            let src = &y[j * ncols + s * out_len..j * ncols + (s + 1) * out_len];
            let dst = &mut out[(s * out_ch + j) * out_len..(s * out_ch + j + 1) * out_len];
            for (d, v) in dst.iter_mut().zip(src) {
                *d = v + bias[j];
            }
        }
    }
    let shape = match batch {
        Some(b) => vec![b, out_ch, out_len],
        None => vec![out_ch, out_len],
    };
    let ctx = Conv1dCtx {
        batch,
        in_len: len,
        out_len,
        pad_left,
        cols,
    };
    Ok((Tensor::new(shape, out)?, ctx))
}

/// Exact adjoints of [`conv1d_forward`].
pub fn conv1d_backward(ctx: &Conv1dCtx, p: &ConvParams, dy: &Tensor) -> Result<ConvGrads> {
    let b = ctx.batch.unwrap_or(1);
    let out_ch = p.out_channels();
    let in_ch = p.in_channels();
    let k = p.kernel_size();
    let out_len = ctx.out_len;
    let expected: Vec<usize> = match ctx.batch {
        Some(b) => vec![b, out_ch, out_len],
        None => vec![out_ch, out_len],
    };
    if dy.shape() != expected.as_slice() {
        return Err(Error::Dimension {
            op: "conv1d_backward",
            lhs: expected,
            rhs: dy.shape().to_vec(),
        });
    }
    let ncols = b * out_len;
    let rows = in_ch * k;

    let mut dyc = vec![0.0; out_ch * ncols];
    let mut dbias = vec![0.0; out_ch];
    let dyd = dy.data();
    for s in 0..b {
        for j in 0..out_ch {
            let src = &dyd[(s * out_ch + j) * out_len..(s * out_ch + j + 1) * out_len];
            dyc[j * ncols + s * out_len..j * ncols + (s + 1) * out_len].copy_from_slice(src);
            dbias[j] += src.iter().sum::<f64>();
        }
    }

    let mut dk = vec![0.0; out_ch * rows];
    gemm(false, true, out_ch, rows, ncols, 1.0, &dyc, &ctx.cols, 0.0, &mut dk);
    let mut dcols = vec![0.0; rows * ncols];
    gemm(true, false, rows, ncols, out_ch, 1.0, p.kernels.data(), &dyc, 0.0, &mut dcols);

    let len = ctx.in_len;
    let mut dx = vec![0.0; b * in_ch * len];
    for i in 0..in_ch {
        for tau in 0..k {
            let row = &dcols[(i * k + tau) * ncols..(i * k + tau + 1) * ncols];
            for s in 0..b {
                let dst = &mut dx[(s * in_ch + i) * len..(s * in_ch + i + 1) * len];
                for t in 0..out_len {
                    let pos = (t * p.stride + tau) as isize - ctx.pad_left as isize;
                    if pos >= 0 && (pos as usize) < len {
                        dst[pos as usize] += row[s * out_len + t];
                    }
                }
            }
        }
    }
    let dx_shape = match ctx.batch {
        Some(b) => vec![b, in_ch, len],
        None => vec![in_ch, len],
    };
    Ok(ConvGrads {
        dx: Tensor::new(dx_shape, dx)?,
        dkernels: Tensor::new(p.kernels.shape().to_vec(), dk)?,
        dbias: Tensor::new(vec![out_ch], dbias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: &[f64], out: usize, inc: usize, k: usize, b: f64, padding: Padding) -> ConvParams {
        ConvParams::new(
            Tensor::new(vec![out, inc, k], w.to_vec()).unwrap(),
            Tensor::full(&[out], b),
            1,
            padding,
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = conv1d_forward(&x, &params(&[1.0], 1, 1, 1, 0.0, Padding::Valid)).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pair_sum_kernel() {
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = conv1d_forward(&x, &params(&[1.0, 1.0], 1, 1, 2, 0.0, Padding::Valid)).unwrap();
        assert_eq!(y.shape(), &[1, 3]);
        assert_eq!(y.data(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn zero_input_yields_bias() {
        let x = Tensor::zeros(&[1, 5]);
        let (y, _) = conv1d_forward(&x, &params(&[0.3, -2.0, 1.1], 1, 1, 3, 0.7, Padding::Same)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn short_input_rejected_under_valid() {
        let x = Tensor::zeros(&[1, 2]);
        let err = conv1d_forward(&x, &params(&[1.0; 3], 1, 1, 3, 0.0, Padding::Valid)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let x = Tensor::zeros(&[2, 6]);
        assert!(conv1d_forward(&x, &params(&[1.0; 3], 1, 1, 3, 0.0, Padding::Valid)).is_err());
    }

    #[test]
    fn strided_same_padding_geometry() {
        let p = ConvParams::new(Tensor::zeros(&[1, 1, 3]), Tensor::zeros(&[1]), 2, Padding::Same).unwrap();
        assert_eq!(p.output_geometry(7).unwrap(), (4, 1));
        assert_eq!(p.output_geometry(8).unwrap(), (4, 0));
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let x = Tensor::new(vec![2, 5], (0..10).map(|v| v as f64 * 0.1).collect()).unwrap();
        let p = params(&[0.5; 12], 2, 2, 3, 0.1, Padding::Same);
        let (y, ctx) = conv1d_forward(&x, &p).unwrap();
        let g = conv1d_backward(&ctx, &p, &Tensor::zeros(y.shape())).unwrap();
        assert!(g.dx.data().iter().chain(g.dkernels.data()).chain(g.dbias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_case_weight_gradient_is_input() {
        let x = Tensor::new(vec![1, 1], vec![1.7]).unwrap();
        let p = params(&[0.4], 1, 1, 1, 0.0, Padding::Valid);
        let (_, ctx) = conv1d_forward(&x, &p).unwrap();
        let dy = Tensor::new(vec![1, 1], vec![-2.5]).unwrap();
        let g = conv1d_backward(&ctx, &p, &dy).unwrap();
        assert_eq!(g.dkernels.data(), &[-2.5 * 1.7]);
        assert_eq!(g.dbias.data(), &[-2.5]);
        assert_eq!(g.dx.data(), &[-2.5 * 0.4]);
    }
}
