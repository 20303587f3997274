//! Central finite differences, the gradient oracle used all over the tests.

use super::tensor::{NumError, Tensor};

/// Default relative step: `h_j = 1e-5 · max(1, |x_j|)` balances truncation
/// against rounding at f64.
pub const DEFAULT_REL_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar function of one tensor.
///
/// Perturbs each coordinate by `h_j = rel_step · max(1, |x_j|)` and returns
/// `(f(x + h e_j) − f(x − h e_j)) / 2h` per coordinate. Errors if `f`
/// produces a non-finite value at any probe point.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, rel_step: f64) -> Result<Tensor, NumError>
where
    F: FnMut(&Tensor) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for j in 0..x.len() {
        let x_j = x.data()[j];
        let h = rel_step * x_j.abs().max(1.0);
        probe.data_mut()[j] = x_j + h;
        let f_plus = f(&probe);
        probe.data_mut()[j] = x_j - h;
        let f_minus = f(&probe);
        probe.data_mut()[j] = x_j;
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(NumError::NonFinite {
                context: format!("finite_diff_grad probe at coordinate {j}"),
            });
        }
        grad.data_mut()[j] = (f_plus - f_minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Relative error between two gradients: `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor)`.
///
/// Zero when both are zero; robust to individually tiny coordinates.
pub fn rel_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut diff_sq = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        diff_sq += (x - y) * (x - y);
    }
    let denom = a.norm().max(b.norm()).max(1e-12);
    diff_sq.sqrt() / denom
}
