//! The norm-ratio reconstruction loss and its exact gradients with respect
//! to every Tucker component, with the top-k mask treated as constant.

use crate::decomp::basis::SubnetworkBasis;
use crate::decomp::topk::{batch_topk, TopKMask};
use crate::decomp::DecompError;
use crate::numkit::Tensor;

/// Denominator guard for zero-gradient batches and samples.
pub const RECON_EPS: f64 = 1e-12;

/// Batch norm-ratio reconstruction loss:
/// `‖G − Ĝ‖₂ / (‖G‖₂ + ε)` over the stacked batch of per-sample gradients
/// (the L2 norm of the stack is the Frobenius norm).
///
/// This is the trained and reported loss. Treating the batch as one tensor
/// weights samples by gradient magnitude, so near-zero gradients neither
/// dilute nor dominate the ratio.
pub fn recon_loss(grads: &[Vec<Tensor>], grad_hats: &[Vec<Tensor>]) -> f64 {
    assert_eq!(grads.len(), grad_hats.len());
    let mut res_sq = 0.0;
    let mut g_sq = 0.0;
    for (g, gh) in grads.iter().zip(grad_hats) {
        for (gt, ght) in g.iter().zip(gh) {
            for (a, b) in gt.data().iter().zip(ght.data()) {
                res_sq += (a - b) * (a - b);
                g_sq += a * a;
            }
        }
    }
    res_sq.sqrt() / (g_sq.sqrt() + RECON_EPS)
}

/// Per-sample norm ratio averaged over the batch:
/// `mean_s ‖g_s − ĝ_s‖₂ / (‖g_s‖₂ + ε)`.
///
/// The sample-wise reading of the same ratio, kept for diagnostics; each
/// sample counts equally regardless of its gradient magnitude.
pub fn recon_loss_per_sample(grads: &[Vec<Tensor>], grad_hats: &[Vec<Tensor>]) -> f64 {
    assert_eq!(grads.len(), grad_hats.len());
    let n_s = grads.len();
    let mut total = 0.0;
    for (g, gh) in grads.iter().zip(grad_hats) {
        let mut res_sq = 0.0;
        let mut g_sq = 0.0;
        for (gt, ght) in g.iter().zip(gh) {
            for (a, b) in gt.data().iter().zip(ght.data()) {
                res_sq += (a - b) * (a - b);
                g_sq += a * a;
            }
        }
        total += res_sq.sqrt() / (g_sq.sqrt() + RECON_EPS);
    }
    total / n_s as f64
}

/// Gradients of the batch reconstruction loss for every core and factor of
/// every in/out block, in the basis component order.
#[derive(Debug, Clone)]
pub struct BasisGrads {
    pub components: Vec<Tensor>,
    pub loss: f64,
}

/// Dense per-step view of the basis: both transforms materialized once so
/// the per-sample work is flat dot products.
struct DenseBasis {
    in_dirs: Vec<Vec<Tensor>>,
    out_dirs: Vec<Vec<Tensor>>,
}

impl DenseBasis {
    fn new(basis: &SubnetworkBasis) -> Self {
        DenseBasis {
            in_dirs: (0..basis.n_v()).map(|k| basis.materialize_in(k)).collect(),
            out_dirs: (0..basis.n_v()).map(|k| basis.materialize_out(k)).collect(),
        }
    }

    fn coeffs(&self, g: &[Tensor]) -> Result<Vec<f64>, DecompError> {
        self.in_dirs
            .iter()
            .map(|blocks| {
                if blocks.len() != g.len() {
                    return Err(DecompError::Shape(format!(
                        "gradient has {} blocks, basis expects {}",
                        g.len(),
                        blocks.len()
                    )));
                }
                let mut acc = 0.0;
                for (b, gi) in blocks.iter().zip(g) {
                    acc += b.dot(gi)?;
                }
                Ok(acc)
            })
            .collect()
    }
}

fn reconstruct_sample(
    dense: &DenseBasis,
    coeffs: &[f64],
    selected: &[bool],
    ghat: &mut [Tensor],
) {
    for t in ghat.iter_mut() {
        t.fill(0.0);
    }
    for (k, (&on, &c)) in selected.iter().zip(coeffs).enumerate() {
        if !on || c == 0.0 {
            continue;
        }
        for (gh, dir) in ghat.iter_mut().zip(&dense.out_dirs[k]) {
            gh.axpy(c, dir).expect("shapes fixed at construction");
        }
    }
}

fn residual_sq(g: &[Tensor], ghat: &[Tensor]) -> (f64, f64) {
    let mut res_sq = 0.0;
    let mut g_sq = 0.0;
    for (gt, ght) in g.iter().zip(ghat) {
        for (a, b) in gt.data().iter().zip(ght.data()) {
            res_sq += (a - b) * (a - b);
            g_sq += a * a;
        }
    }
    (res_sq, g_sq)
}

/// Batch loss value under a fixed mask (no gradients). Used by the trainer's
/// evaluation pass and by the finite-difference checks.
pub fn masked_loss(
    basis: &SubnetworkBasis,
    grads: &[Vec<Tensor>],
    mask: &TopKMask,
) -> Result<f64, DecompError> {
    let dense = DenseBasis::new(basis);
    let mut res_sq_total = 0.0;
    let mut g_sq_total = 0.0;
    let mut ghat: Vec<Tensor> = grads[0].iter().map(|t| Tensor::zeros(t.shape())).collect();
    for (s, g) in grads.iter().enumerate() {
        let coeffs = dense.coeffs(g)?;
        reconstruct_sample(&dense, &coeffs, mask.row(s), &mut ghat);
        let (r, gs) = residual_sq(g, &ghat);
        res_sq_total += r;
        g_sq_total += gs;
    }
    Ok(res_sq_total.sqrt() / (g_sq_total.sqrt() + RECON_EPS))
}

/// Exact gradient of the batch loss with the mask held constant
/// (straight-through treatment of the non-differentiable top-k selection).
///
/// With `R = ‖G − Ĝ‖₂`, `N = ‖G‖₂ + ε` over the stacked batch, the loss is
/// `R/N` and, per sample `s` with `c = coefficients`, `r_s = g_s − ĝ_s`,
/// `β = 1/(R·N)`:
///   ∂L/∂V_out[k]  = Σ_s −β·m_{s,k}·c_{s,k} · r_s
///   ∂L/∂V_in[k]   = Σ_s −β·m_{s,k}·⟨r_s, V_out[k]⟩ · g_s
/// and each dense block gradient chains into its Tucker components.
/// A batch with exact zero residual has zero gradients (the norm's
/// subgradient at zero is taken as zero).
pub fn masked_loss_gradients(
    basis: &SubnetworkBasis,
    grads: &[Vec<Tensor>],
    mask: &TopKMask,
) -> Result<BasisGrads, DecompError> {
    let n_v = basis.n_v();
    let n_t = basis.n_tensors();
    let n_s = grads.len();
    assert_eq!(mask.n_s(), n_s);
    assert_eq!(mask.n_v(), n_v);

    let dense = DenseBasis::new(basis);
    let mut ghat: Vec<Tensor> = grads[0].iter().map(|t| Tensor::zeros(t.shape())).collect();

    // first pass: coefficients, residual and gradient norms over the batch
    let mut all_coeffs: Vec<Vec<f64>> = Vec::with_capacity(n_s);
    let mut res_sq_total = 0.0;
    let mut g_sq_total = 0.0;
    for (s, g) in grads.iter().enumerate() {
        let coeffs = dense.coeffs(g)?;
        reconstruct_sample(&dense, &coeffs, mask.row(s), &mut ghat);
        let (r, gs) = residual_sq(g, &ghat);
        res_sq_total += r;
        g_sq_total += gs;
        all_coeffs.push(coeffs);
    }
    let res_norm = res_sq_total.sqrt();
    let denom = g_sq_total.sqrt() + RECON_EPS;
    let loss = res_norm / denom;

    let zero_components = |basis: &SubnetworkBasis| {
        basis
            .component_tensors()
            .into_iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect::<Vec<_>>()
    };
    if res_norm == 0.0 {
        return Ok(BasisGrads {
            components: zero_components(basis),
            loss,
        });
    }
    let beta = 1.0 / (res_norm * denom);

    // second pass: accumulate upstream dense gradients per (subnetwork, tensor)
    let mut e_in: Vec<Vec<Tensor>> = (0..n_v)
        .map(|k| (0..n_t).map(|i| Tensor::zeros(basis.in_block(k, i).target_shape())).collect())
        .collect();
    let mut e_out: Vec<Vec<Tensor>> = (0..n_v)
        .map(|k| (0..n_t).map(|i| Tensor::zeros(basis.out_block(k, i).target_shape())).collect())
        .collect();

    for (s, g) in grads.iter().enumerate() {
        let coeffs = &all_coeffs[s];
        let selected = mask.row(s);
        reconstruct_sample(&dense, coeffs, selected, &mut ghat);

        for k in 0..n_v {
            if !selected[k] {
                continue;
            }
            // ρ_{s,k} = ⟨r_s, out direction k⟩
            let mut rho = 0.0;
            for ((gt, ght), dir) in g.iter().zip(&ghat).zip(&dense.out_dirs[k]) {
                for ((a, b), d) in gt.data().iter().zip(ght.data()).zip(dir.data()) {
                    rho += (a - b) * d;
                }
            }
            let a_out = -beta * coeffs[k];
            let a_in = -beta * rho;
            for i in 0..n_t {
                {
                    let eo = e_out[k][i].data_mut();
                    let gd = g[i].data();
                    let ghd = ghat[i].data();
                    for j in 0..eo.len() {
                        eo[j] += a_out * (gd[j] - ghd[j]);
                    }
                }
                {
                    let ei = e_in[k][i].data_mut();
                    let gd = g[i].data();
                    for j in 0..ei.len() {
                        ei[j] += a_in * gd[j];
                    }
                }
            }
        }
    }

    // chain dense upstream gradients into Tucker components, in the
    // canonical component order (in before out, core before factors)
    let mut components = Vec::new();
    for k in 0..n_v {
        for i in 0..n_t {
            let (core_g, factor_g) = basis.in_block(k, i).component_grads(&e_in[k][i]);
            components.push(core_g);
            components.extend(factor_g);
            let (core_g, factor_g) = basis.out_block(k, i).component_grads(&e_out[k][i]);
            components.push(core_g);
            components.extend(factor_g);
        }
    }

    Ok(BasisGrads { components, loss })
}

/// Project, select, and differentiate in one call: the per-step training
/// computation. Returns the gradients (with the loss) and the mask used.
pub fn loss_gradients(
    basis: &SubnetworkBasis,
    grads: &[Vec<Tensor>],
    k: f64,
) -> Result<(BasisGrads, TopKMask), DecompError> {
    let n_s = grads.len();
    let dense = DenseBasis::new(basis);
    let mut coeff_grid = Tensor::zeros(&[n_s, basis.n_v()]);
    for (s, g) in grads.iter().enumerate() {
        let c = dense.coeffs(g)?;
        coeff_grid.row_mut(s).copy_from_slice(&c);
    }
    let mask = batch_topk(&coeff_grid, k)?;
    let bg = masked_loss_gradients(basis, grads, &mask)?;
    if !bg.loss.is_finite() {
        return Err(DecompError::NonFinite("reconstruction loss".into()));
    }
    Ok((bg, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, MlpSpec, ParamSet};
    use crate::numkit::RngState;

    fn small_setup(seed: u64, n_v: usize, rank: usize) -> (ParamSet, SubnetworkBasis, RngState) {
        let spec = MlpSpec::new(
            vec![3, 2, 3],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(seed);
        let params = spec.init_params(&mut rng);
        let basis = SubnetworkBasis::init_uniform(&params, n_v, rank, &mut rng).unwrap();
        (params, basis, rng)
    }

    fn random_grads(params: &ParamSet, rng: &mut RngState, n_s: usize) -> Vec<Vec<Tensor>> {
        (0..n_s)
            .map(|_| {
                params
                    .tensors()
                    .iter()
                    .map(|t| rng.uniform(-1.0, 1.0, t.shape()).unwrap())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn perfect_reconstruction_gives_zero_loss() {
        let (params, _, mut rng) = small_setup(1, 2, 1);
        let g = random_grads(&params, &mut rng, 3);
        assert_eq!(recon_loss(&g, &g), 0.0);
        assert_eq!(recon_loss_per_sample(&g, &g), 0.0);
    }

    #[test]
    fn null_reconstruction_gives_loss_near_one() {
        let (params, _, mut rng) = small_setup(2, 2, 1);
        let g = random_grads(&params, &mut rng, 3);
        let zeros: Vec<Vec<Tensor>> = g
            .iter()
            .map(|sample| sample.iter().map(|t| Tensor::zeros(t.shape())).collect())
            .collect();
        let loss = recon_loss(&g, &zeros);
        assert!((loss - 1.0).abs() < 1e-9, "loss {loss}");
        let loss = recon_loss_per_sample(&g, &zeros);
        assert!((loss - 1.0).abs() < 1e-9, "per-sample loss {loss}");
    }

    #[test]
    fn loss_is_scale_invariant() {
        let (params, _, mut rng) = small_setup(3, 2, 1);
        let g = random_grads(&params, &mut rng, 4);
        let gh = random_grads(&params, &mut rng, 4);
        let scale = |xs: &[Vec<Tensor>], c: f64| -> Vec<Vec<Tensor>> {
            xs.iter()
                .map(|sample| {
                    sample
                        .iter()
                        .map(|t| {
                            let mut s = t.clone();
                            s.scale(c);
                            s
                        })
                        .collect()
                })
                .collect()
        };
        let base = recon_loss(&g, &gh);
        let scaled = recon_loss(&scale(&g, 37.5), &scale(&gh, 37.5));
        assert!((base - scaled).abs() < 1e-9, "{base} vs {scaled}");
        let base = recon_loss_per_sample(&g, &gh);
        let scaled = recon_loss_per_sample(&scale(&g, 37.5), &scale(&gh, 37.5));
        assert!((base - scaled).abs() < 1e-9, "{base} vs {scaled}");
    }

    #[test]
    fn dense_coeffs_match_factored_projection() {
        let (params, basis, mut rng) = small_setup(11, 3, 2);
        let g = random_grads(&params, &mut rng, 1).pop().unwrap();
        let dense = DenseBasis::new(&basis);
        let fast = dense.coeffs(&g).unwrap();
        let factored = basis.project(&g).unwrap();
        for (a, b) in fast.iter().zip(&factored) {
            let rel = (a - b).abs() / b.abs().max(1e-12);
            assert!(rel <= 1e-10);
        }
    }

    #[test]
    fn zero_gradient_batch_gives_zero_basis_gradients() {
        let (params, basis, _) = small_setup(4, 2, 1);
        let zeros: Vec<Vec<Tensor>> = (0..3)
            .map(|_| params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect())
            .collect();
        let (bg, mask) = loss_gradients(&basis, &zeros, 0.5).unwrap();
        assert_eq!(bg.loss, 0.0);
        assert!(bg.components.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        // mask still has the full cardinality (all coefficients tie at zero)
        assert_eq!(mask.count(), 3);
    }

    #[test]
    fn gradients_match_finite_differences_with_mask_frozen() {
        // tiny model: 3 parameter tensors, n_v = 2, rank 1
        let (params, basis, mut rng) = small_setup(5, 2, 1);
        let grads = random_grads(&params, &mut rng, 4);
        let (_, mask) = loss_gradients(&basis, &grads, 0.4).unwrap();
        let bg = masked_loss_gradients(&basis, &grads, &mask).unwrap();

        // finite differences through every component, mask held fixed
        let components = basis.component_tensors();
        for (ci, comp) in components.iter().enumerate() {
            let fd = crate::numkit::finite_diff_grad(
                |probe| {
                    let mut b = basis.clone();
                    *b.component_tensors_mut()[ci] = probe.clone();
                    masked_loss(&b, &grads, &mask).unwrap()
                },
                comp,
                crate::numkit::DEFAULT_REL_STEP,
            )
            .unwrap();
            let rel = crate::numkit::rel_error(&bg.components[ci], &fd);
            assert!(rel <= 1e-5, "component {ci}: rel err {rel}");
        }
    }

    #[test]
    fn stationary_at_perfect_reconstruction() {
        // orthonormal single-tensor basis with V_in = V_outᵀ and gradient in
        // the span: reconstruction is exact and gradients are ≈ 0 where the
        // residual vanishes.
        let params = ParamSet::from_entries(vec![(
            "w".into(),
            Tensor::zeros(&[2, 2]),
        )])
        .unwrap();
        let dir = |a: f64, b: f64, c: f64, d: f64| {
            crate::decomp::tucker::TuckerTensor::from_parts(
                vec![2, 2],
                Tensor::from_vec(&[1, 1], vec![1.0]),
                vec![
                    Tensor::from_vec(&[2, 1], vec![a, b]),
                    Tensor::from_vec(&[2, 1], vec![c, d]),
                ],
            )
            .unwrap()
        };
        // two orthonormal rank-1 directions
        let v0 = dir(1.0, 0.0, 1.0, 0.0);
        let v1 = dir(0.0, 1.0, 0.0, 1.0);
        let basis = SubnetworkBasis::from_parts(
            vec!["w".into()],
            vec![vec![v0.clone()], vec![v1.clone()]],
            vec![vec![v0], vec![v1]],
        )
        .unwrap();
        // gradient in the span of both directions
        let g = vec![vec![Tensor::from_vec(&[2, 2], vec![0.7, 0.0, 0.0, -0.3])]];
        let (bg, _) = loss_gradients(&basis, &g, 1.0).unwrap();
        assert!(bg.loss < 1e-9, "loss {}", bg.loss);
        for t in &bg.components {
            assert!(t.data().iter().all(|&v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn exact_reconstruction_in_span_with_full_mask() {
        // project/reconstruct round trip at k = 1 for a gradient in the span
        // of an orthonormal basis with V_in = V_outᵀ
        let params = ParamSet::from_entries(vec![(
            "w".into(),
            Tensor::zeros(&[2, 2]),
        )])
        .unwrap();
        let dir = |a: f64, b: f64, c: f64, d: f64| {
            crate::decomp::tucker::TuckerTensor::from_parts(
                vec![2, 2],
                Tensor::from_vec(&[1, 1], vec![1.0]),
                vec![
                    Tensor::from_vec(&[2, 1], vec![a, b]),
                    Tensor::from_vec(&[2, 1], vec![c, d]),
                ],
            )
            .unwrap()
        };
        let v0 = dir(1.0, 0.0, 0.0, 1.0);
        let v1 = dir(0.0, 1.0, 1.0, 0.0);
        let basis = SubnetworkBasis::from_parts(
            vec!["w".into()],
            vec![vec![v0.clone()], vec![v1.clone()]],
            vec![vec![v0.clone()], vec![v1.clone()]],
        )
        .unwrap();
        let g_dense = {
            let mut t = v0.materialize();
            t.scale(0.8);
            t.axpy(-1.7, &v1.materialize()).unwrap();
            t
        };
        let g = vec![vec![g_dense.clone()]];
        let coeffs = basis.project(&g[0]).unwrap();
        let out_dirs: Vec<Vec<Tensor>> = (0..2).map(|k| basis.materialize_out(k)).collect();
        let mut ghat = vec![Tensor::zeros(&[2, 2])];
        basis.reconstruct_into(&coeffs, &[true, true], &out_dirs, &mut ghat);
        let mut diff = ghat[0].clone();
        diff.axpy(-1.0, &g_dense).unwrap();
        let rel = diff.norm() / g_dense.norm();
        assert!(rel <= 1e-10, "rel err {rel}");
    }
}
