//! Impact attribution: how strongly a subnetwork participates in the
//! divergence gradient of a sample, and which outputs a subnetwork moves.

use crate::analysis::AnalysisError;
use crate::decomp::SubnetworkBasis;
use crate::models::{
    forward_outputs, grad_divergence, jvp_in_direction, Divergence, MlpSpec, ParamSet,
};
use crate::numkit::{RngState, Tensor};

/// Mean impacts per (sample, subnetwork) plus the reference count they were
/// averaged over. All entries are ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTable {
    pub impacts: Tensor,
    pub n_refs: usize,
}

/// Impact of every subnetwork on the divergence between `f(x_i)` and one
/// reference output: the absolute projection coefficients of the gradient.
pub fn impact(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    x_i: &[f64],
    y_j: &[f64],
    divergence: Divergence,
) -> Result<Vec<f64>, AnalysisError> {
    let grads = grad_divergence(spec, params, x_i, y_j, divergence)?;
    let coeffs = basis.project(&grads)?;
    Ok(coeffs.into_iter().map(f64::abs).collect())
}

/// Arithmetic mean of [`impact`] over many reference outputs.
pub fn mean_impact(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    x_i: &[f64],
    refs: &[&[f64]],
    divergence: Divergence,
) -> Result<Vec<f64>, AnalysisError> {
    if refs.is_empty() {
        return Err(AnalysisError::Input("mean_impact needs at least one reference".into()));
    }
    let mut acc = vec![0.0; basis.n_v()];
    for y_j in refs {
        let one = impact(spec, params, basis, x_i, y_j, divergence)?;
        for (a, v) in acc.iter_mut().zip(one) {
            *a += v;
        }
    }
    let inv = 1.0 / refs.len() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(acc)
}

/// Mean impacts of every subnetwork on every dataset sample, using `n_refs`
/// reference outputs drawn from the model's own outputs on the dataset.
pub fn impact_table(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    inputs: &Tensor,
    n_refs: usize,
    divergence: Divergence,
    rng: &mut RngState,
) -> Result<ImpactTable, AnalysisError> {
    if n_refs == 0 {
        return Err(AnalysisError::Input("n_refs must be positive".into()));
    }
    let n_s = inputs.shape()[0];
    if n_s == 0 {
        return Err(AnalysisError::Input("empty dataset".into()));
    }
    let outputs = forward_outputs(spec, params, inputs)?;
    let mut impacts = Tensor::zeros(&[n_s, basis.n_v()]);
    for s in 0..n_s {
        let refs: Vec<&[f64]> = (0..n_refs)
            .map(|_| outputs.row(rng.next_below(n_s)))
            .collect();
        let mi = mean_impact(spec, params, basis, inputs.row(s), &refs, divergence)?;
        impacts.row_mut(s).copy_from_slice(&mi);
    }
    Ok(ImpactTable { impacts, n_refs })
}

/// Per subnetwork, the `top_n` dataset samples ranked by mean impact
/// (descending, ties broken by lower sample index).
pub fn top_samples(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    inputs: &Tensor,
    n_refs: usize,
    top_n: usize,
    divergence: Divergence,
    rng: &mut RngState,
) -> Result<Vec<Vec<usize>>, AnalysisError> {
    let table = impact_table(spec, params, basis, inputs, n_refs, divergence, rng)?;
    let n_s = inputs.shape()[0];
    let mut ranked = Vec::with_capacity(basis.n_v());
    for v in 0..basis.n_v() {
        let mut idx: Vec<usize> = (0..n_s).collect();
        idx.sort_by(|&a, &b| {
            table.impacts.at(&[b, v]).total_cmp(&table.impacts.at(&[a, v])).then(a.cmp(&b))
        });
        idx.truncate(top_n);
        ranked.push(idx);
    }
    Ok(ranked)
}

/// Output indices most affected by moving along subnetwork `k`: argsort of
/// the absolute directional derivative of each output, descending.
pub fn most_affected_outputs(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    x: &[f64],
    k: usize,
    top_n: usize,
) -> Result<Vec<usize>, AnalysisError> {
    if k >= basis.n_v() {
        return Err(AnalysisError::Input(format!(
            "subnetwork {k} out of range (n_v = {})",
            basis.n_v()
        )));
    }
    let dir = basis.materialize_out(k);
    let norm_sq: f64 = dir.iter().map(Tensor::norm_sq).sum();
    if norm_sq == 0.0 {
        return Err(AnalysisError::ZeroNorm(format!("direction of subnetwork {k}")));
    }
    let jvp = jvp_in_direction(spec, params, x, &dir)?;
    let mut idx: Vec<usize> = (0..jvp.len()).collect();
    idx.sort_by(|&a, &b| jvp[b].abs().total_cmp(&jvp[a].abs()).then(a.cmp(&b)));
    idx.truncate(top_n);
    Ok(idx)
}
