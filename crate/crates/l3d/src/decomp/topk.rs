//! Batch-level top-k selection over projection coefficients.

use crate::decomp::DecompError;
use crate::numkit::Tensor;

/// Boolean selection over an `n_s×n_v` coefficient grid plus the selection
/// threshold.
///
/// Exactly `floor(k·n_s·n_v)` entries are true. Ties at the threshold are
/// broken by lowest flat index so reruns are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKMask {
    n_s: usize,
    n_v: usize,
    selected: Vec<bool>,
    pub tau: f64,
}

impl TopKMask {
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    #[inline]
    pub fn is_selected(&self, s: usize, v: usize) -> bool {
        self.selected[s * self.n_v + v]
    }

    pub fn row(&self, s: usize) -> &[bool] {
        &self.selected[s * self.n_v..(s + 1) * self.n_v]
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&b| b).count()
    }
}

/// Select the `floor(k·n_s·n_v)` largest coefficients by magnitude across
/// the whole batch. `τ` is the smallest selected magnitude.
pub fn batch_topk(coeffs: &Tensor, k: f64) -> Result<TopKMask, DecompError> {
    if coeffs.ndim() != 2 {
        return Err(DecompError::Shape(format!(
            "coefficients must be n_s×n_v, got {:?}",
            coeffs.shape()
        )));
    }
    if !(k > 0.0 && k <= 1.0) {
        return Err(DecompError::Config(format!("k = {k} outside (0, 1]")));
    }
    let (n_s, n_v) = (coeffs.shape()[0], coeffs.shape()[1]);
    let total = n_s * n_v;
    let target = ((k * total as f64).floor() as usize).min(total);
    if target == 0 {
        return Err(DecompError::EmptySelection { k, n_s, n_v });
    }
    if coeffs.data().iter().any(|v| !v.is_finite()) {
        return Err(DecompError::NonFinite("projection coefficients".into()));
    }

    let mut order: Vec<usize> = (0..total).collect();
    // magnitude descending, flat index ascending on ties
    order.sort_unstable_by(|&a, &b| {
        coeffs.data()[b]
            .abs()
            .total_cmp(&coeffs.data()[a].abs())
            .then(a.cmp(&b))
    });
    let mut selected = vec![false; total];
    for &idx in &order[..target] {
        selected[idx] = true;
    }
    let tau = coeffs.data()[order[target - 1]].abs();
    Ok(TopKMask {
        n_s,
        n_v,
        selected,
        tau,
    })
}
