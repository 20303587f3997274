//! Recover the mixing-matrix entries of a linear-combination toy model from
//! a learned basis by tracing each subnetwork's encoder/decoder path.

use crate::analysis::AnalysisError;
use crate::decomp::SubnetworkBasis;
use crate::models::MlpSpec;
use crate::numkit::Tensor;

/// One subnetwork's recovered column: the feature it traces, the output
/// whose decoder direction dominates, and the end-to-end path coefficients
/// per output.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimate {
    pub subnetwork: usize,
    /// Input feature with the largest encoder-column norm.
    pub feature: usize,
    /// Output with the largest decoder fan-in norm.
    pub dominant_output: usize,
    /// `â_j = Σ_h dec[j,h]·enc[h, feature]` — a scalar multiple of the true
    /// column `A[:, feature]` when the subnetwork traces one feature.
    pub a_hat: Vec<f64>,
}

/// Trace every subnetwork of a single-hidden-layer model.
///
/// Products of one encoder and one decoder entry make the estimate invariant
/// to the sign ambiguity of subnetwork directions.
pub fn extract_coefficients(
    spec: &MlpSpec,
    basis: &SubnetworkBasis,
) -> Result<Vec<CoefficientEstimate>, AnalysisError> {
    if spec.n_layers() != 2 {
        return Err(AnalysisError::Shape(format!(
            "coefficient extraction needs a single-hidden-layer model, got {} layers",
            spec.n_layers()
        )));
    }
    let enc_idx = basis
        .tensor_names()
        .iter()
        .position(|n| n == "w0")
        .ok_or_else(|| AnalysisError::Shape("basis has no w0 block".into()))?;
    let dec_idx = basis
        .tensor_names()
        .iter()
        .position(|n| n == "w1")
        .ok_or_else(|| AnalysisError::Shape("basis has no w1 block".into()))?;

    let n_i = spec.input_dim();
    let n_o = spec.output_dim();
    let n_h = spec.dims[1];

    let mut estimates = Vec::with_capacity(basis.n_v());
    for k in 0..basis.n_v() {
        let enc = basis.out_block(k, enc_idx).materialize(); // n_h×n_i
        let dec = basis.out_block(k, dec_idx).materialize(); // n_o×n_h

        // input feature with the largest encoder column
        let mut feature = 0;
        let mut best = -1.0;
        for i in 0..n_i {
            let norm_sq: f64 = (0..n_h).map(|h| enc.at(&[h, i]).powi(2)).sum();
            if norm_sq > best {
                best = norm_sq;
                feature = i;
            }
        }
        // output with the largest decoder fan-in
        let mut dominant_output = 0;
        let mut best = -1.0;
        for j in 0..n_o {
            let norm_sq: f64 = dec.row(j).iter().map(|v| v * v).sum();
            if norm_sq > best {
                best = norm_sq;
                dominant_output = j;
            }
        }
        // end-to-end path weight feature → hidden → output j
        let a_hat: Vec<f64> = (0..n_o)
            .map(|j| (0..n_h).map(|h| dec.at(&[j, h]) * enc.at(&[h, feature])).sum())
            .collect();
        estimates.push(CoefficientEstimate {
            subnetwork: k,
            feature,
            dominant_output,
            a_hat,
        });
    }
    Ok(estimates)
}

/// Scale-adjusted Pearson r² between the recovered columns and the true
/// mixing matrix.
///
/// Each subnetwork's estimate is fit to its traced column of `A` with one
/// free least-squares scale (the directions are unit-normalized, so only
/// the shape is meaningful); r² is computed over all pooled pairs.
pub fn coefficient_r2(estimates: &[CoefficientEstimate], a: &Tensor) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for est in estimates {
        let true_col: Vec<f64> = (0..a.shape()[0]).map(|j| a.at(&[j, est.feature])).collect();
        let dot: f64 = est.a_hat.iter().zip(&true_col).map(|(x, y)| x * y).sum();
        let nrm: f64 = est.a_hat.iter().map(|x| x * x).sum();
        let scale = if nrm > 0.0 { dot / nrm } else { 0.0 };
        for (x, y) in est.a_hat.iter().zip(&true_col) {
            xs.push(scale * x);
            ys.push(*y);
        }
    }
    pearson_r2(&xs, &ys)
}

fn pearson_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    (cov * cov) / (vx * vy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::TuckerTensor;
    use crate::models::{Activation, ParamSet};
    use crate::numkit::RngState;

    /// Hand-built linear-combination model with an identity encoder and an
    /// exact rank-1 per-feature basis.
    fn constructed_case() -> (MlpSpec, Tensor, SubnetworkBasis) {
        let n = 4;
        let spec = MlpSpec::new(
            vec![n, n, n],
            vec![Activation::Identity, Activation::Relu],
            vec![false, false],
        )
        .unwrap();
        let mut rng = RngState::new(3);
        let a = rng.uniform(0.0, 3.0, &[n, n]).unwrap();

        let e_col = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            Tensor::from_vec(&[n, 1], v)
        };
        let mut in_blocks = Vec::new();
        let mut out_blocks = Vec::new();
        for k in 0..n {
            // encoder block: e_k ⊗ e_kᵀ; decoder block: A[:,k] ⊗ e_kᵀ
            let enc = TuckerTensor::from_parts(
                vec![n, n],
                Tensor::from_vec(&[1, 1], vec![1.0]),
                vec![e_col(k), e_col(k)],
            )
            .unwrap();
            let a_col = Tensor::from_vec(&[n, 1], (0..n).map(|j| a.at(&[j, k])).collect());
            let dec = TuckerTensor::from_parts(
                vec![n, n],
                Tensor::from_vec(&[1, 1], vec![1.0]),
                vec![a_col, e_col(k)],
            )
            .unwrap();
            in_blocks.push(vec![enc.clone(), dec.clone()]);
            out_blocks.push(vec![enc, dec]);
        }
        let basis =
            SubnetworkBasis::from_parts(vec!["w0".into(), "w1".into()], in_blocks, out_blocks)
                .unwrap();
        (spec, a, basis)
    }

    #[test]
    fn constructed_rank_one_decomposition_recovers_a_exactly() {
        let (spec, a, basis) = constructed_case();
        let estimates = extract_coefficients(&spec, &basis).unwrap();
        for (k, est) in estimates.iter().enumerate() {
            assert_eq!(est.feature, k);
            for j in 0..4 {
                assert!((est.a_hat[j] - a.at(&[j, k])).abs() < 1e-12);
            }
        }
        let r2 = coefficient_r2(&estimates, &a);
        assert!((r2 - 1.0).abs() < 1e-12, "r² = {r2}");
    }

    #[test]
    fn sign_flip_leaves_estimates_unchanged() {
        let (spec, _, basis) = constructed_case();
        let base = extract_coefficients(&spec, &basis).unwrap();
        // negate subnetwork 2's out direction by negating its cores
        let mut flipped = basis.clone();
        {
            let names: Vec<String> = flipped.tensor_names().to_vec();
            let mut in_blocks = Vec::new();
            let mut out_blocks = Vec::new();
            for k in 0..flipped.n_v() {
                in_blocks.push(flipped.in_blocks(k).to_vec());
                let mut row = flipped.out_blocks(k).to_vec();
                if k == 2 {
                    for block in &mut row {
                        block.core_mut().scale(-1.0);
                    }
                }
                out_blocks.push(row);
            }
            flipped = SubnetworkBasis::from_parts(names, in_blocks, out_blocks).unwrap();
        }
        let after = extract_coefficients(&spec, &flipped).unwrap();
        for (b, a) in base.iter().zip(&after) {
            assert_eq!(b.feature, a.feature);
            for (x, y) in b.a_hat.iter().zip(&a.a_hat) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_deep_models() {
        let spec = MlpSpec::new(
            vec![3, 3, 3, 3],
            vec![Activation::Identity; 3],
            vec![false; 3],
        )
        .unwrap();
        let params = ParamSet::from_entries(vec![
            ("w0".into(), Tensor::zeros(&[3, 3])),
            ("w1".into(), Tensor::zeros(&[3, 3])),
            ("w2".into(), Tensor::zeros(&[3, 3])),
        ])
        .unwrap();
        let basis = SubnetworkBasis::zeros(&params, 2, 1);
        assert!(extract_coefficients(&spec, &basis).is_err());
    }
}
