//! AdamW with decoupled weight decay over a flat list of named tensors.

use super::tensor::{NumError, Tensor};

/// Optimizer hyperparameters. The toy experiments only ever set `lr`; the
/// remaining values are the usual defaults.
#[derive(Debug, Clone, Copy)]
pub struct AdamWParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamWParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// AdamW state: first/second moments per tracked tensor plus a step counter.
///
/// The slot order is fixed at construction and every `step` call must pass
/// parameter and gradient lists in that same order.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub hyper: AdamWParams,
    labels: Vec<String>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step_count: u64,
}

impl AdamW {
    /// Moments start at zero, shaped like `params`; `labels` name each slot
    /// for error reporting.
    pub fn new(hyper: AdamWParams, params: &[Tensor], labels: Vec<String>) -> Self {
        assert_eq!(params.len(), labels.len(), "one label per parameter");
        AdamW {
            hyper,
            labels,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One decoupled-weight-decay Adam update.
    ///
    /// Rejects shape mismatches and non-finite gradients, naming the
    /// offending tensor.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NumError> {
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        self.step_refs(&mut refs, grads)
    }

    /// Same update over borrowed tensors, for parameters that live inside
    /// nested structures.
    pub fn step_refs(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<(), NumError> {
        assert_eq!(params.len(), self.m.len(), "slot count changed");
        assert_eq!(grads.len(), self.m.len(), "slot count changed");
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(NumError::ShapeMismatch {
                    op: "adamw_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(NumError::NonFinite {
                    context: format!("gradient of {}", self.labels[i]),
                });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(t);
        let bc2 = 1.0 - h.beta2.powi(t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for j in 0..pd.len() {
                if h.weight_decay != 0.0 {
                    pd[j] -= h.lr * h.weight_decay * pd[j];
                }
                md[j] = h.beta1 * md[j] + (1.0 - h.beta1) * gd[j];
                vd[j] = h.beta2 * vd[j] + (1.0 - h.beta2) * gd[j] * gd[j];
                let m_hat = md[j] / bc1;
                let v_hat = vd[j] / bc2;
                pd[j] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
            }
        }
        Ok(())
    }
}
