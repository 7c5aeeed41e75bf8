/// Denominator floor for relative errors, so gradients that are zero on both
/// sides up to roundoff do not produce spurious failures.
const REL_ERR_FLOOR: f64 = 1e-6;

/// Central differences `(f(x + eps) - f(x - eps)) / 2 eps` for every
/// coordinate of `x`.
pub fn numerical_gradient(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = buf[i];
            buf[i] = orig + eps;
            let plus = f(&buf);
            buf[i] = orig - eps;
            let minus = f(&buf);
            buf[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// `max_i |a_i - n_i| / max(|a_i| + |n_i|, 1e-6)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(REL_ERR_FLOOR))
        .fold(0.0, f64::max)
}

/// Compare an analytic gradient of `f` at `x` with central differences and
/// return the maximum relative error.
pub fn grad_check(x: &[f64], analytic: &[f64], eps: f64, f: impl FnMut(&[f64]) -> f64) -> f64 {
    max_relative_error(analytic, &numerical_gradient(x, eps, f))
}
