use super::{gemm, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer, `weight: [n_in, n_out]`, `bias: [n_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dx: Tensor,
    pub dweight: Tensor,
    pub dbias: Tensor,
}

fn check(x: &Tensor, p: &DenseParams) -> Result<(usize, usize, usize)> {
    let (b, n_in) = x.dims2()?;
    let (w_in, n_out) = p.weight.dims2()?;
    if n_in != w_in || p.bias.shape() != [n_out] {
        return Err(Error::Dimension {
            op: "dense",
            lhs: x.shape().to_vec(),
            rhs: p.weight.shape().to_vec(),
        });
    }
    Ok((b, n_in, n_out))
}

/// `x W + b` for `x: [B, n_in]`.
pub fn dense(x: &Tensor, p: &DenseParams) -> Result<Tensor> {
    let (b, n_in, n_out) = check(x, p)?;
    let mut out: Vec<f64> = p.bias.data().repeat(b);
    gemm(false, false, b, n_out, n_in, 1.0, x.data(), p.weight.data(), 1.0, &mut out);
    Tensor::new(vec![b, n_out], out)
}

pub fn dense_backward(x: &Tensor, p: &DenseParams, dy: &Tensor) -> Result<DenseGrads> {
    let (b, n_in, n_out) = check(x, p)?;
    if dy.shape() != [b, n_out] {
        return Err(Error::Dimension {
            op: "dense_backward",
            lhs: vec![b, n_out],
            rhs: dy.shape().to_vec(),
        });
    }
    let mut dx = vec![0.0; b * n_in];
    gemm(false, true, b, n_in, n_out, 1.0, dy.data(), p.weight.data(), 0.0, &mut dx);
    let mut dw = vec![0.0; n_in * n_out];
    gemm(true, false, n_in, n_out, b, 1.0, x.data(), dy.data(), 0.0, &mut dw);
    let mut db = vec![0.0; n_out];
    for row in dy.data().chunks_exact(n_out) {
        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
    }
    Ok(DenseGrads {
        dx: Tensor::new(vec![b, n_in], dx)?,
        dweight: Tensor::new(vec![n_in, n_out], dw)?,
        dbias: Tensor::new(vec![n_out], db)?,
    })
}
