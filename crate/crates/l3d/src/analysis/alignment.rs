//! Alignment between subnetwork encoder directions and a model's learned
//! feature embeddings.

use crate::analysis::AnalysisError;
use crate::decomp::SubnetworkBasis;
use crate::models::ParamSet;
use crate::numkit::Tensor;

/// Absolute cosine between each subnetwork's encoder block and each input
/// feature's encoder pattern.
///
/// The model's embedding of feature `i` is column `i` of its first weight
/// matrix; the matching pattern in parameter space puts that column at
/// feature `i` and zeros elsewhere. Entry `(k, i)` is
/// `|⟨enc_k[:, i], u_i⟩| / (‖enc_k‖_F · ‖u_i‖)` — 1 exactly when subnetwork
/// `k`'s encoder mass sits in column `i` parallel to the embedding.
/// Absolute value because subnetwork directions carry a sign ambiguity.
pub fn cosine_alignment(
    params: &ParamSet,
    basis: &SubnetworkBasis,
) -> Result<Tensor, AnalysisError> {
    let w0 = params
        .get("w0")
        .ok_or_else(|| AnalysisError::Shape("model has no w0 tensor".into()))?;
    let enc_idx = basis
        .tensor_names()
        .iter()
        .position(|n| n == "w0")
        .ok_or_else(|| AnalysisError::Shape("basis has no w0 block".into()))?;
    let (n_h, n_i) = (w0.shape()[0], w0.shape()[1]);

    let mut scores = Tensor::zeros(&[basis.n_v(), n_i]);
    for k in 0..basis.n_v() {
        let enc = basis.out_block(k, enc_idx).materialize();
        let enc_norm = enc.norm();
        if enc_norm == 0.0 {
            return Err(AnalysisError::ZeroNorm(format!(
                "encoder block of subnetwork {k}"
            )));
        }
        for i in 0..n_i {
            let mut dot = 0.0;
            let mut u_norm_sq = 0.0;
            for h in 0..n_h {
                let u = w0.at(&[h, i]);
                dot += enc.at(&[h, i]) * u;
                u_norm_sq += u * u;
            }
            if u_norm_sq == 0.0 {
                return Err(AnalysisError::ZeroNorm(format!("embedding column {i}")));
            }
            scores.set(&[k, i], dot.abs() / (enc_norm * u_norm_sq.sqrt()));
        }
    }
    Ok(scores)
}
