use crate::{Result, TensorError};

/// Denominator floor for the per-coordinate relative error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Central-difference gradient of `f` at `point`.
pub fn central_difference<F>(mut f: F, point: &[f64], epsilon: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(TensorError::NonFinite("central_difference epsilon"));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let plus = f(&x);
        x[i] = orig - epsilon;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(TensorError::NonFinite("central_difference"));
        }
        grad.push((plus - minus) / (2.0 * epsilon));
    }
    Ok(grad)
}

/// Compares `analytic_grad(point)` against central differences of `f` and returns
/// the largest per-coordinate relative error
/// `|a - n| / max(GRAD_CHECK_FLOOR, |a| + |n|)`.
pub fn grad_check<F, G>(mut f: F, analytic_grad: G, point: &[f64], epsilon: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
    G: FnOnce(&[f64]) -> Vec<f64>,
{
    if !f(point).is_finite() {
        return Err(TensorError::NonFinite("grad_check f(point)"));
    }
    let analytic = analytic_grad(point);
    if analytic.len() != point.len() {
        return Err(TensorError::DimensionMismatch {
            op: "grad_check",
            expected: point.len(),
            actual: analytic.len(),
        });
    }
    if !analytic.iter().all(|g| g.is_finite()) {
        return Err(TensorError::NonFinite("grad_check analytic gradient"));
    }
    let numeric = central_difference(f, point, epsilon)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(GRAD_CHECK_FLOOR))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_matches_closed_form() {
        let err = grad_check(|x| x[0] * x[0], |x| vec![2.0 * x[0]], &[3.0], 1e-5).unwrap();
        assert!(err < 1e-7, "err = {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let err = grad_check(|_| 4.0, |x| vec![0.0; x.len()], &[1.0, -2.0, 0.5], 1e-4).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let err = grad_check(|x| x[0].sin(), |x| vec![x[0].sin()], &[0.7], 1e-5).unwrap();
        assert!(err > 0.05, "err = {err}");
    }

    #[test]
    fn non_finite_value_is_an_error() {
        let err = grad_check(|x| x[0].ln(), |x| vec![1.0 / x[0]], &[-1.0], 1e-5).unwrap_err();
        assert!(matches!(err, TensorError::NonFinite(_)));
    }

    #[test]
    fn multivariate_quadratic() {
        // f(x, y) = x^2 y + 3y, df = (2xy, x^2 + 3)
        let f = |p: &[f64]| p[0] * p[0] * p[1] + 3.0 * p[1];
        let g = |p: &[f64]| vec![2.0 * p[0] * p[1], p[0] * p[0] + 3.0];
        let err = grad_check(f, g, &[1.5, -0.25], 1e-5).unwrap();
        assert!(err < 1e-8, "err = {err}");
    }
}
