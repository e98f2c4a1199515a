//! Central finite-difference gradient checking.

/// Relative error used throughout: `|a - n| / max(1e-8, |a| + |n|)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn numeric_partial<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + eps;
    let plus = f(&probe);
    probe[i] = x[i] - eps;
    let minus = f(&probe);
    (plus - minus) / (2.0 * eps)
}

pub fn numeric_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], eps: f64) -> Vec<f64> {
    (0..x.len()).map(|i| numeric_partial(&mut f, x, i, eps)).collect()
}

/// Largest relative error between `analytic` and the central-difference
/// gradient of the scalar function `f` at `x`, over all coordinates.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    let coords: Vec<usize> = (0..x.len()).collect();
    grad_check_coords(f, x, analytic, &coords, eps)
}

/// As [`grad_check`], restricted to the listed coordinates.
pub fn grad_check_coords<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
    eps: f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length");
    coords
        .iter()
        .map(|&i| rel_error(analytic[i], numeric_partial(&mut f, x, i, eps)))
        .fold(0.0, f64::max)
}
