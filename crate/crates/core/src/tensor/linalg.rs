use super::Tensor;
use crate::error::{Error, Result};

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers, where `op(a)`
/// is `m x k` and `op(b)` is `k x n`. A transposed operand is stored in its
/// untransposed layout (`k x m` for `a`, `n x k` for `b`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs buffer");
    assert_eq!(b.len(), k * n, "gemm: rhs buffer");
    assert_eq!(c.len(), m * n, "gemm: output buffer");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the length assertions above guarantee every strided access
    // stays inside its buffer, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::Dimension {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let mut out = vec![0.0; m * n];
    gemm(false, false, m, n, k, 1.0, a.data(), b.data(), 0.0, &mut out);
    Tensor::new(vec![m, n], out)
}

/// Adjoints of `c = a b`: returns `(dc bᵀ, aᵀ dc)`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, dc: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, k) = a.dims2()?;
    let (_, n) = b.dims2()?;
    if dc.shape() != [m, n] {
        return Err(Error::Dimension {
            op: "matmul_backward",
            lhs: vec![m, n],
            rhs: dc.shape().to_vec(),
        });
    }
    let mut da = vec![0.0; m * k];
    gemm(false, true, m, k, n, 1.0, dc.data(), b.data(), 0.0, &mut da);
    let mut db = vec![0.0; k * n];
    gemm(true, false, k, n, m, 1.0, a.data(), dc.data(), 0.0, &mut db);
    Ok((Tensor::new(vec![m, k], da)?, Tensor::new(vec![k, n], db)?))
}
