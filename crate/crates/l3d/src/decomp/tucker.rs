//! Low-rank Tucker blocks: one core tensor plus one factor matrix per mode.
//!
//! Each subnetwork direction is stored as one `TuckerTensor` per model
//! parameter tensor, bounding the rank of the direction along every mode.

use serde::{Deserialize, Serialize};

use crate::numkit::{n_mode_product, NumError, RngState, Tensor};

/// A tensor in Tucker form: `G ×₁ U⁽¹⁾ ×₂ U⁽²⁾ … ×_N U⁽ᴺ⁾` with core
/// `G ∈ R^{R_1×…×R_N}` and factors `U⁽ⁿ⁾ ∈ R^{I_n×R_n}`.
///
/// Vectors are 1-mode tensors: a single factor `I×R` and a core of length
/// `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerTensor {
    target_shape: Vec<usize>,
    ranks: Vec<usize>,
    core: Tensor,
    factors: Vec<Tensor>,
}

impl TuckerTensor {
    /// Zero block with ranks clipped to the mode extents.
    pub fn zeros(target_shape: &[usize], rank: usize) -> Self {
        assert!(rank >= 1, "rank must be at least 1");
        assert!(!target_shape.is_empty());
        let ranks: Vec<usize> = target_shape.iter().map(|&e| rank.min(e)).collect();
        let factors = target_shape
            .iter()
            .zip(&ranks)
            .map(|(&e, &r)| Tensor::zeros(&[e, r]))
            .collect();
        TuckerTensor {
            target_shape: target_shape.to_vec(),
            ranks: ranks.clone(),
            core: Tensor::zeros(&ranks),
            factors,
        }
    }

    /// Build from explicit parts, checking the type invariants.
    pub fn from_parts(
        target_shape: Vec<usize>,
        core: Tensor,
        factors: Vec<Tensor>,
    ) -> Result<Self, NumError> {
        if factors.len() != target_shape.len() || core.ndim() != target_shape.len() {
            return Err(NumError::ShapeMismatch {
                op: "tucker_from_parts",
                lhs: target_shape,
                rhs: core.shape().to_vec(),
            });
        }
        let ranks = core.shape().to_vec();
        for (n, f) in factors.iter().enumerate() {
            let want = [target_shape[n], ranks[n]];
            if f.shape() != want || ranks[n] == 0 || ranks[n] > target_shape[n] {
                return Err(NumError::ShapeMismatch {
                    op: "tucker_factor",
                    lhs: f.shape().to_vec(),
                    rhs: want.to_vec(),
                });
            }
        }
        Ok(TuckerTensor {
            target_shape,
            ranks,
            core,
            factors,
        })
    }

    /// Uniform init in `[-1/√(max extent), 1/√(max extent))` for the core
    /// and every factor.
    pub fn init_uniform(&mut self, rng: &mut RngState) {
        let bound = 1.0 / (*self.target_shape.iter().max().unwrap() as f64).sqrt();
        self.core = rng.uniform(-bound, bound, self.core.shape()).unwrap();
        for f in &mut self.factors {
            *f = rng.uniform(-bound, bound, f.shape()).unwrap();
        }
    }

    pub fn target_shape(&self) -> &[usize] {
        &self.target_shape
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn core(&self) -> &Tensor {
        &self.core
    }

    pub fn factors(&self) -> &[Tensor] {
        &self.factors
    }

    pub fn core_mut(&mut self) -> &mut Tensor {
        &mut self.core
    }

    pub fn factor_mut(&mut self, n: usize) -> &mut Tensor {
        &mut self.factors[n]
    }

    /// Mutable core and factors together (optimizer wiring).
    pub fn parts_mut(&mut self) -> (&mut Tensor, &mut [Tensor]) {
        (&mut self.core, &mut self.factors)
    }

    /// Number of scalar components (core plus factors).
    pub fn n_components(&self) -> usize {
        self.core.len() + self.factors.iter().map(Tensor::len).sum::<usize>()
    }

    /// Dense materialization `G ×₁ U⁽¹⁾ … ×_N U⁽ᴺ⁾`.
    pub fn materialize(&self) -> Tensor {
        let mut t = self.core.clone();
        for (n, u) in self.factors.iter().enumerate() {
            t = n_mode_product(&t, u, n).expect("factor shapes checked at construction");
        }
        debug_assert_eq!(t.shape(), &self.target_shape[..]);
        t
    }

    /// Inner product `⟨materialize(self), g⟩` via the factored contraction
    /// `⟨G ×ₙ U, g⟩ = ⟨G, g ×ₙ Uᵀ⟩` — no dense materialization.
    pub fn project(&self, g: &Tensor) -> Result<f64, NumError> {
        if g.shape() != self.target_shape.as_slice() {
            return Err(NumError::ShapeMismatch {
                op: "tucker_project",
                lhs: self.target_shape.clone(),
                rhs: g.shape().to_vec(),
            });
        }
        let mut reduced = g.clone();
        for (n, u) in self.factors.iter().enumerate() {
            let ut = crate::numkit::transpose(u);
            reduced = n_mode_product(&reduced, &ut, n)?;
        }
        self.core.dot(&reduced)
    }

    /// Chain an upstream gradient `e = ∂L/∂materialize(self)` into gradients
    /// for the core and every factor.
    ///
    /// Core: `e ×₁ U⁽¹⁾ᵀ … ×_N U⁽ᴺ⁾ᵀ`. Factor n: `E₍ₙ₎ · W₍ₙ₎ᵀ` where `W` is
    /// the materialization with mode n left in core coordinates.
    pub fn component_grads(&self, e: &Tensor) -> (Tensor, Vec<Tensor>) {
        debug_assert_eq!(e.shape(), &self.target_shape[..]);
        // core gradient
        let mut core_grad = e.clone();
        for (n, u) in self.factors.iter().enumerate() {
            let ut = crate::numkit::transpose(u);
            core_grad = n_mode_product(&core_grad, &ut, n).unwrap();
        }
        // factor gradients
        let mut factor_grads = Vec::with_capacity(self.factors.len());
        for n in 0..self.factors.len() {
            let mut w = self.core.clone();
            for (m, u) in self.factors.iter().enumerate() {
                if m != n {
                    w = n_mode_product(&w, u, m).unwrap();
                }
            }
            // dU[i, r] = Σ_{outer, inner} E[o, i, q] · W[o, r, q]
            let i_n = self.target_shape[n];
            let r_n = self.ranks[n];
            let outer: usize = self.target_shape[..n].iter().product();
            let inner: usize = self.target_shape[n + 1..].iter().product();
            let mut du = Tensor::zeros(&[i_n, r_n]);
            let ed = e.data();
            let wd = w.data();
            for o in 0..outer {
                for i in 0..i_n {
                    let e_off = (o * i_n + i) * inner;
                    for r in 0..r_n {
                        let w_off = (o * r_n + r) * inner;
                        let mut acc = 0.0;
                        for q in 0..inner {
                            acc += ed[e_off + q] * wd[w_off + q];
                        }
                        du.data_mut()[i * r_n + r] += acc;
                    }
                }
            }
            factor_grads.push(du);
        }
        (core_grad, factor_grads)
    }
}
