//! Divergence measures between a sample output and a reference output:
//! normalized MSE for regression outputs, KL for probability outputs.

use serde::{Deserialize, Serialize};

use crate::models::ModelError;

/// Which divergence to decompose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divergence {
    Mse,
    Kl,
}

impl Divergence {
    pub fn value(self, y: &[f64], y_r: &[f64]) -> Result<f64, ModelError> {
        match self {
            Divergence::Mse => divergence_mse(y, y_r),
            Divergence::Kl => divergence_kl(y, y_r),
        }
    }

    /// Gradient of the divergence with respect to `y`, written into `out`.
    pub fn grad_output(self, y: &[f64], y_r: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        check_lengths(y, y_r)?;
        assert_eq!(out.len(), y.len());
        match self {
            Divergence::Mse => {
                let n_o = y.len() as f64;
                for i in 0..y.len() {
                    out[i] = 2.0 / n_o * (y[i] - y_r[i]);
                }
            }
            Divergence::Kl => {
                // d/dp_k KL(softmax(p) ‖ softmax(q))
                //   = P_k · ((log P_k − log Q_k) − KL)
                let log_p = log_softmax(y)?;
                let log_q = log_softmax(y_r)?;
                let kl: f64 = log_p
                    .iter()
                    .zip(&log_q)
                    .map(|(&lp, &lq)| lp.exp() * (lp - lq))
                    .sum();
                for k in 0..y.len() {
                    out[k] = log_p[k].exp() * ((log_p[k] - log_q[k]) - kl);
                }
            }
        }
        Ok(())
    }
}

fn check_lengths(y: &[f64], y_r: &[f64]) -> Result<(), ModelError> {
    if y.len() != y_r.len() {
        return Err(ModelError::Shape(format!(
            "divergence arguments have lengths {} and {}",
            y.len(),
            y_r.len()
        )));
    }
    Ok(())
}

/// Normalized mean squared error: `‖y − y_r‖² / n_o`.
pub fn divergence_mse(y: &[f64], y_r: &[f64]) -> Result<f64, ModelError> {
    check_lengths(y, y_r)?;
    let n_o = y.len() as f64;
    Ok(y.iter()
        .zip(y_r)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n_o)
}

fn log_softmax(logits: &[f64]) -> Result<Vec<f64>, ModelError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("logits".into()));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&v| v - lse).collect())
}

/// `KL(softmax(p) ‖ softmax(q))` with log-sum-exp stabilization.
pub fn divergence_kl(logits_p: &[f64], logits_q: &[f64]) -> Result<f64, ModelError> {
    check_lengths(logits_p, logits_q)?;
    let log_p = log_softmax(logits_p)?;
    let log_q = log_softmax(logits_q)?;
    Ok(log_p
        .iter()
        .zip(&log_q)
        .map(|(&lp, &lq)| lp.exp() * (lp - lq))
        .sum())
}
