//! The learned pair of transforms between parameter space and subnetwork
//! space: per subnetwork, one Tucker block per model parameter tensor for
//! each direction.

use serde::{Deserialize, Serialize};

use crate::decomp::tucker::TuckerTensor;
use crate::decomp::DecompError;
use crate::models::ParamSet;
use crate::numkit::{RngState, Tensor};

/// The in/out transform pair for `n_v` subnetworks.
///
/// `in_blocks[k][i]` projects gradients of model tensor `i` onto subnetwork
/// `k`; `out_blocks[k][i]` is that subnetwork's direction in the same tensor.
/// Block order matches the model's parameter flattening order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetworkBasis {
    n_v: usize,
    tensor_names: Vec<String>,
    in_blocks: Vec<Vec<TuckerTensor>>,
    out_blocks: Vec<Vec<TuckerTensor>>,
}

impl SubnetworkBasis {
    /// Zero basis shaped after the model's parameters, with ranks clipped to
    /// each mode extent.
    pub fn zeros(params: &ParamSet, n_v: usize, rank: usize) -> Self {
        let make = || -> Vec<Vec<TuckerTensor>> {
            (0..n_v)
                .map(|_| {
                    params
                        .tensors()
                        .iter()
                        .map(|t| TuckerTensor::zeros(t.shape(), rank))
                        .collect()
                })
                .collect()
        };
        SubnetworkBasis {
            n_v,
            tensor_names: params.names().map(String::from).collect(),
            in_blocks: make(),
            out_blocks: make(),
        }
    }

    /// Random init for all components, then one normalization of the out
    /// directions.
    pub fn init_uniform(
        params: &ParamSet,
        n_v: usize,
        rank: usize,
        rng: &mut RngState,
    ) -> Result<Self, DecompError> {
        let mut basis = SubnetworkBasis::zeros(params, n_v, rank);
        for k in 0..n_v {
            for block in &mut basis.in_blocks[k] {
                block.init_uniform(rng);
            }
            for block in &mut basis.out_blocks[k] {
                block.init_uniform(rng);
            }
        }
        basis.normalize_out()?;
        Ok(basis)
    }

    pub fn from_parts(
        tensor_names: Vec<String>,
        in_blocks: Vec<Vec<TuckerTensor>>,
        out_blocks: Vec<Vec<TuckerTensor>>,
    ) -> Result<Self, DecompError> {
        let n_v = in_blocks.len();
        if out_blocks.len() != n_v || n_v == 0 {
            return Err(DecompError::Config(
                "in/out block counts disagree or are empty".into(),
            ));
        }
        for blocks in in_blocks.iter().chain(out_blocks.iter()) {
            if blocks.len() != tensor_names.len() {
                return Err(DecompError::Config(
                    "block count does not match tensor name count".into(),
                ));
            }
        }
        Ok(SubnetworkBasis {
            n_v,
            tensor_names,
            in_blocks,
            out_blocks,
        })
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_tensors(&self) -> usize {
        self.tensor_names.len()
    }

    pub fn tensor_names(&self) -> &[String] {
        &self.tensor_names
    }

    pub fn in_block(&self, k: usize, i: usize) -> &TuckerTensor {
        &self.in_blocks[k][i]
    }

    pub fn out_block(&self, k: usize, i: usize) -> &TuckerTensor {
        &self.out_blocks[k][i]
    }

    pub fn in_blocks(&self, k: usize) -> &[TuckerTensor] {
        &self.in_blocks[k]
    }

    pub fn out_blocks(&self, k: usize) -> &[TuckerTensor] {
        &self.out_blocks[k]
    }

    /// Check the basis block shapes against a model's parameters.
    pub fn matches_params(&self, params: &ParamSet) -> bool {
        self.tensor_names.len() == params.len()
            && self.in_blocks.iter().chain(&self.out_blocks).all(|blocks| {
                blocks
                    .iter()
                    .zip(params.tensors())
                    .all(|(b, t)| b.target_shape() == t.shape())
            })
    }

    /// Dense subnetwork direction: one tensor per model parameter tensor.
    pub fn materialize_out(&self, k: usize) -> Vec<Tensor> {
        self.out_blocks[k].iter().map(TuckerTensor::materialize).collect()
    }

    pub fn materialize_in(&self, k: usize) -> Vec<Tensor> {
        self.in_blocks[k].iter().map(TuckerTensor::materialize).collect()
    }

    /// Global L2 norm of subnetwork `k`'s concatenated out direction.
    pub fn out_norm(&self, k: usize) -> f64 {
        self.out_blocks[k]
            .iter()
            .map(|b| b.materialize().norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescale every subnetwork's out direction to unit global L2 norm by
    /// scaling its core tensors; in blocks are untouched.
    pub fn normalize_out(&mut self) -> Result<(), DecompError> {
        for k in 0..self.n_v {
            let norm = self.out_norm(k);
            if norm == 0.0 || !norm.is_finite() {
                return Err(DecompError::ZeroNormSubnetwork(k));
            }
            let inv = 1.0 / norm;
            for block in &mut self.out_blocks[k] {
                block.core_mut().scale(inv);
            }
        }
        Ok(())
    }

    /// Project a parameter-shaped gradient onto all subnetworks via the
    /// factored contraction: coefficient `k` is `Σ_i ⟨in_block[k][i], g_i⟩`.
    pub fn project(&self, grads: &[Tensor]) -> Result<Vec<f64>, DecompError> {
        if grads.len() != self.n_tensors() {
            return Err(DecompError::Shape(format!(
                "gradient has {} blocks, basis expects {}",
                grads.len(),
                self.n_tensors()
            )));
        }
        let mut coeffs = Vec::with_capacity(self.n_v);
        for k in 0..self.n_v {
            let mut acc = 0.0;
            for (block, g) in self.in_blocks[k].iter().zip(grads) {
                acc += block.project(g)?;
            }
            coeffs.push(acc);
        }
        Ok(coeffs)
    }

    /// Reconstruction `ĝ = Σ_k mask·coeff_k · out_direction_k` for one
    /// sample, given pre-materialized out directions.
    pub fn reconstruct_into(
        &self,
        coeffs: &[f64],
        selected: &[bool],
        out_dirs: &[Vec<Tensor>],
        ghat: &mut [Tensor],
    ) {
        for t in ghat.iter_mut() {
            t.fill(0.0);
        }
        for k in 0..self.n_v {
            if !selected[k] || coeffs[k] == 0.0 {
                continue;
            }
            for (g, dir) in ghat.iter_mut().zip(&out_dirs[k]) {
                g.axpy(coeffs[k], dir).expect("shapes fixed at construction");
            }
        }
    }

    /// Deterministic flat order of all trainable components:
    /// subnetwork-major, tensor-minor, in before out, core before factors.
    pub fn component_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for k in 0..self.n_v {
            for i in 0..self.tensor_names.len() {
                for block in [&self.in_blocks[k][i], &self.out_blocks[k][i]] {
                    out.push(block.core());
                    out.extend(block.factors().iter());
                }
            }
        }
        out
    }

    /// Mutable view in the same order as [`SubnetworkBasis::component_tensors`].
    pub fn component_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for (inb, outb) in self.in_blocks.iter_mut().zip(self.out_blocks.iter_mut()) {
            for (ib, ob) in inb.iter_mut().zip(outb.iter_mut()) {
                let (core, factors) = ib.parts_mut();
                out.push(core);
                out.extend(factors.iter_mut());
                let (core, factors) = ob.parts_mut();
                out.push(core);
                out.extend(factors.iter_mut());
            }
        }
        out
    }

    /// Labels matching the component order, e.g. `v3.w1.out.core`.
    pub fn component_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 0..self.n_v {
            for (i, name) in self.tensor_names.iter().enumerate() {
                for (dir, block) in [("in", &self.in_blocks[k][i]), ("out", &self.out_blocks[k][i])] {
                    out.push(format!("v{k}.{name}.{dir}.core"));
                    for n in 0..block.factors().len() {
                        out.push(format!("v{k}.{name}.{dir}.u{n}"));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, MlpSpec};

    fn small_params() -> ParamSet {
        let spec = MlpSpec::new(
            vec![4, 3, 4],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(1);
        spec.init_params(&mut rng)
    }

    #[test]
    fn normalized_out_directions_have_unit_norm() {
        let params = small_params();
        let mut rng = RngState::new(2);
        let basis = SubnetworkBasis::init_uniform(&params, 4, 2, &mut rng).unwrap();
        for k in 0..4 {
            assert!((basis.out_norm(k) - 1.0).abs() <= 1e-9, "subnetwork {k}");
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let params = small_params();
        let mut rng = RngState::new(3);
        let mut basis = SubnetworkBasis::init_uniform(&params, 2, 1, &mut rng).unwrap();
        let before = basis.materialize_out(0);
        basis.normalize_out().unwrap();
        let after = basis.materialize_out(0);
        for (a, b) in before.iter().zip(&after) {
            let mut diff = a.clone();
            diff.axpy(-1.0, b).unwrap();
            assert!(diff.norm() <= 1e-12);
        }
    }

    #[test]
    fn normalize_halves_a_norm_two_direction() {
        // single 1-mode tensor, rank 1: direction of norm 2 → core halved
        let params = ParamSet::from_entries(vec![(
            "b".into(),
            Tensor::from_vec(&[4], vec![0.0; 4]),
        )])
        .unwrap();
        let mut basis = SubnetworkBasis::zeros(&params, 1, 1);
        let blocks = vec![TuckerTensor::from_parts(
            vec![4],
            Tensor::from_vec(&[1], vec![1.0]),
            vec![Tensor::from_vec(&[4, 1], vec![2.0, 0.0, 0.0, 0.0])],
        )
        .unwrap()];
        basis.out_blocks[0] = blocks;
        assert!((basis.out_norm(0) - 2.0).abs() < 1e-15);
        basis.normalize_out().unwrap();
        assert!((basis.out_blocks[0][0].core().data()[0] - 0.5).abs() < 1e-15);
        assert!((basis.out_norm(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_direction_is_an_error_naming_the_subnetwork() {
        let params = small_params();
        let mut basis = SubnetworkBasis::zeros(&params, 3, 1);
        match basis.normalize_out() {
            Err(DecompError::ZeroNormSubnetwork(0)) => {}
            other => panic!("expected ZeroNormSubnetwork(0), got {other:?}"),
        }
    }

    #[test]
    fn project_zero_gradient_gives_zero_coefficients() {
        let params = small_params();
        let mut rng = RngState::new(4);
        let basis = SubnetworkBasis::init_uniform(&params, 3, 1, &mut rng).unwrap();
        let zeros = params.zeros_like();
        let coeffs = basis.project(&zeros).unwrap();
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn project_is_bilinear() {
        let params = small_params();
        let mut rng = RngState::new(5);
        let basis = SubnetworkBasis::init_uniform(&params, 3, 2, &mut rng).unwrap();
        let g1: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| rng.uniform(-1.0, 1.0, t.shape()).unwrap())
            .collect();
        let g2: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| rng.uniform(-1.0, 1.0, t.shape()).unwrap())
            .collect();
        let (a, b) = (0.7, -1.3);
        let mut combo = Vec::new();
        for (x, y) in g1.iter().zip(&g2) {
            let mut t = x.clone();
            t.scale(a);
            t.axpy(b, y).unwrap();
            combo.push(t);
        }
        let c1 = basis.project(&g1).unwrap();
        let c2 = basis.project(&g2).unwrap();
        let cc = basis.project(&combo).unwrap();
        for k in 0..3 {
            let want = a * c1[k] + b * c2[k];
            assert!((cc[k] - want).abs() <= 1e-10, "k={k}: {} vs {want}", cc[k]);
        }
    }

    #[test]
    fn project_matches_materialize_then_dot_oracle() {
        let params = small_params();
        let mut rng = RngState::new(6);
        let basis = SubnetworkBasis::init_uniform(&params, 4, 2, &mut rng).unwrap();
        let g: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| rng.uniform(-1.0, 1.0, t.shape()).unwrap())
            .collect();
        let fast = basis.project(&g).unwrap();
        for k in 0..4 {
            let slow: f64 = basis
                .materialize_in(k)
                .iter()
                .zip(&g)
                .map(|(m, gi)| m.dot(gi).unwrap())
                .sum();
            let rel = (fast[k] - slow).abs() / slow.abs().max(1e-12);
            assert!(rel <= 1e-10, "k={k}");
        }
    }

    #[test]
    fn reconstruct_empty_mask_is_zero_and_single_term_is_scaled_direction() {
        let params = small_params();
        let mut rng = RngState::new(7);
        let basis = SubnetworkBasis::init_uniform(&params, 2, 1, &mut rng).unwrap();
        let out_dirs: Vec<Vec<Tensor>> = (0..2).map(|k| basis.materialize_out(k)).collect();
        let mut ghat = params.zeros_like();

        basis.reconstruct_into(&[1.0, 2.0], &[false, false], &out_dirs, &mut ghat);
        assert!(ghat.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));

        basis.reconstruct_into(&[0.0, -2.5], &[false, true], &out_dirs, &mut ghat);
        for (g, d) in ghat.iter().zip(&out_dirs[1]) {
            let mut want = d.clone();
            want.scale(-2.5);
            let mut diff = g.clone();
            diff.axpy(-1.0, &want).unwrap();
            assert!(diff.norm() == 0.0);
        }
    }
}
