//! Parameter-space interventions: evaluate the model at `W₀ + δ·v_k` and
//! measure how each output moves.

use crate::analysis::AnalysisError;
use crate::decomp::SubnetworkBasis;
use crate::models::{forward_outputs, MlpSpec, ParamSet};
use crate::numkit::Tensor;

/// Output changes for one subnetwork over a δ grid.
#[derive(Debug, Clone)]
pub struct InterventionResult {
    pub subnetwork: usize,
    pub deltas: Vec<f64>,
    /// One `n_s×n_o` change tensor `f(X, W₀+δv) − f(X, W₀)` per δ.
    pub changes: Vec<Tensor>,
}

fn shifted_params(
    params: &ParamSet,
    directions: &[(f64, Vec<Tensor>)],
) -> Result<ParamSet, AnalysisError> {
    let mut blocks: Vec<Tensor> = params.tensors().to_vec();
    for (delta, dir) in directions {
        if *delta == 0.0 {
            continue;
        }
        if blocks.len() != dir.len() {
            return Err(AnalysisError::Shape(
                "direction blocks do not match parameter tensors".into(),
            ));
        }
        for (b, d) in blocks.iter_mut().zip(dir) {
            b.axpy(*delta, d)
                .map_err(|e| AnalysisError::Shape(e.to_string()))?;
        }
    }
    params.with_tensors(blocks).map_err(AnalysisError::Model)
}

/// `f(X, W₀ + δ·materialize(out_block[k]))`; the original model is untouched.
///
/// At δ = 0 the parameters are reused as-is, so outputs are bit-identical to
/// the baseline forward.
pub fn intervene(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    k: usize,
    delta: f64,
    x: &Tensor,
) -> Result<Tensor, AnalysisError> {
    if k >= basis.n_v() {
        return Err(AnalysisError::Input(format!(
            "subnetwork {k} out of range (n_v = {})",
            basis.n_v()
        )));
    }
    if !basis.matches_params(params) {
        return Err(AnalysisError::Shape(
            "basis blocks do not match model parameters".into(),
        ));
    }
    let dir = basis.materialize_out(k);
    let shifted = shifted_params(params, &[(delta, dir)])?;
    forward_outputs(spec, &shifted, x).map_err(AnalysisError::Model)
}

/// Sweep a δ grid for each subnetwork in `subnetworks`, returning per-δ
/// change tensors against the unperturbed baseline.
pub fn intervention_sweep(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    deltas: &[f64],
    x: &Tensor,
    subnetworks: &[usize],
) -> Result<Vec<InterventionResult>, AnalysisError> {
    if deltas.is_empty() {
        return Err(AnalysisError::Input("empty δ grid".into()));
    }
    let baseline = forward_outputs(spec, params, x).map_err(AnalysisError::Model)?;
    let mut results = Vec::with_capacity(subnetworks.len());
    for &k in subnetworks {
        let mut changes = Vec::with_capacity(deltas.len());
        for &d in deltas {
            let mut out = intervene(spec, params, basis, k, d, x)?;
            out.axpy(-1.0, &baseline)
                .map_err(|e| AnalysisError::Shape(e.to_string()))?;
            changes.push(out);
        }
        results.push(InterventionResult {
            subnetwork: k,
            deltas: deltas.to_vec(),
            changes,
        });
    }
    Ok(results)
}

/// Joint intervention on a pair of subnetworks over the full δ_a×δ_b grid.
///
/// Returns row-major `grid[a_idx][b_idx]` change tensors. The `(δ, 0)` slice
/// equals the single-subnetwork sweep exactly.
pub fn pair_intervention_grid(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    pair: (usize, usize),
    deltas_a: &[f64],
    deltas_b: &[f64],
    x: &Tensor,
) -> Result<Vec<Vec<Tensor>>, AnalysisError> {
    if deltas_a.is_empty() || deltas_b.is_empty() {
        return Err(AnalysisError::Input("empty δ grid".into()));
    }
    for k in [pair.0, pair.1] {
        if k >= basis.n_v() {
            return Err(AnalysisError::Input(format!(
                "subnetwork {k} out of range (n_v = {})",
                basis.n_v()
            )));
        }
    }
    let baseline = forward_outputs(spec, params, x).map_err(AnalysisError::Model)?;
    let dir_a = basis.materialize_out(pair.0);
    let dir_b = basis.materialize_out(pair.1);
    let mut grid = Vec::with_capacity(deltas_a.len());
    for &da in deltas_a {
        let mut row = Vec::with_capacity(deltas_b.len());
        for &db in deltas_b {
            let shifted =
                shifted_params(params, &[(da, dir_a.clone()), (db, dir_b.clone())])?;
            let mut out = forward_outputs(spec, &shifted, x).map_err(AnalysisError::Model)?;
            out.axpy(-1.0, &baseline)
                .map_err(|e| AnalysisError::Shape(e.to_string()))?;
            row.push(out);
        }
        grid.push(row);
    }
    Ok(grid)
}

/// Mean absolute change per output index: the per-(subnetwork, δ) summary
/// the reports are built from.
pub fn mean_abs_change(change: &Tensor) -> Vec<f64> {
    let (n_s, n_o) = (change.shape()[0], change.shape()[1]);
    let mut out = vec![0.0; n_o];
    for s in 0..n_s {
        for (o, v) in change.row(s).iter().enumerate() {
            out[o] += v.abs();
        }
    }
    for v in &mut out {
        *v /= n_s as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{jvp_in_direction, Activation};
    use crate::numkit::RngState;

    fn setup() -> (MlpSpec, ParamSet, SubnetworkBasis, Tensor) {
        let spec = MlpSpec::new(
            vec![4, 3, 4],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(21);
        let params = spec.init_params(&mut rng);
        let basis = SubnetworkBasis::init_uniform(&params, 3, 1, &mut rng).unwrap();
        let x = rng.uniform(0.0, 1.0, &[8, 4]).unwrap();
        (spec, params, basis, x)
    }

    #[test]
    fn delta_zero_is_bit_identical_to_baseline() {
        let (spec, params, basis, x) = setup();
        let baseline = forward_outputs(&spec, &params, &x).unwrap();
        let out = intervene(&spec, &params, &basis, 1, 0.0, &x).unwrap();
        assert_eq!(out, baseline);
    }

    #[test]
    fn linear_model_change_equals_delta_times_jvp() {
        let spec = MlpSpec::new(vec![3, 3], vec![Activation::Identity], vec![true]).unwrap();
        let mut rng = RngState::new(22);
        let params = spec.init_params(&mut rng);
        let basis = SubnetworkBasis::init_uniform(&params, 2, 1, &mut rng).unwrap();
        let x = rng.uniform(-1.0, 1.0, &[5, 3]).unwrap();
        let delta = 0.37;
        let out = intervene(&spec, &params, &basis, 0, delta, &x).unwrap();
        let baseline = forward_outputs(&spec, &params, &x).unwrap();
        let dir = basis.materialize_out(0);
        for s in 0..5 {
            let jvp = jvp_in_direction(&spec, &params, x.row(s), &dir).unwrap();
            for o in 0..3 {
                let change = out.at(&[s, o]) - baseline.at(&[s, o]);
                assert!(
                    (change - delta * jvp[o]).abs() < 1e-12,
                    "sample {s} output {o}"
                );
            }
        }
    }

    #[test]
    fn sweep_grid_of_zero_gives_zero_changes() {
        let (spec, params, basis, x) = setup();
        let res = intervention_sweep(&spec, &params, &basis, &[0.0], &x, &[0, 2]).unwrap();
        assert_eq!(res.len(), 2);
        for r in res {
            assert!(r.changes[0].data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn pair_grid_marginal_matches_single_sweep_exactly() {
        let (spec, params, basis, x) = setup();
        let deltas = [-0.5, 0.0, 0.5];
        let singles = intervention_sweep(&spec, &params, &basis, &deltas, &x, &[0]).unwrap();
        let grid =
            pair_intervention_grid(&spec, &params, &basis, (0, 1), &deltas, &[0.0], &x).unwrap();
        for (i, _) in deltas.iter().enumerate() {
            assert_eq!(grid[i][0], singles[0].changes[i], "δ index {i}");
        }
    }

    #[test]
    fn unknown_subnetwork_is_rejected() {
        let (spec, params, basis, x) = setup();
        assert!(matches!(
            intervene(&spec, &params, &basis, 99, 0.1, &x),
            Err(AnalysisError::Input(_))
        ));
    }
}
