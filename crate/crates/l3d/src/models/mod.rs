//! The toy-model zoo: MLP definition, forward pass, analytic parameter
//! gradients, divergence measures, sparse data generators, and training.

pub mod data;
pub mod divergence;
pub mod mlp;
pub mod train;

use std::fmt;

use rayon::prelude::*;

use crate::numkit::{NumError, Tensor};

pub use data::{gen_grouped, gen_sparse, Dataset, TaskKind, ToyTaskSpec};
pub use divergence::{divergence_kl, divergence_mse, Divergence};
pub use mlp::{
    forward, forward_outputs, forward_sample_into, grad_divergence, jvp_in_direction, Activation,
    MlpSpec, ParamSet, SampleCache,
};
pub use train::{train_toy, ToyTrainHyper};

/// Errors from model construction, evaluation, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Spec(String),
    Shape(String),
    Task(String),
    NonFinite(String),
    Diverged { epoch: usize, loss: f64 },
    Num(NumError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Spec(msg) => write!(f, "invalid model spec: {msg}"),
            ModelError::Shape(msg) => write!(f, "shape error: {msg}"),
            ModelError::Task(msg) => write!(f, "invalid task: {msg}"),
            ModelError::NonFinite(what) => write!(f, "non-finite values in {what}"),
            ModelError::Diverged { epoch, loss } => {
                write!(f, "training diverged at epoch {epoch} (loss {loss})")
            }
            ModelError::Num(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<NumError> for ModelError {
    fn from(e: NumError) -> Self {
        ModelError::Num(e)
    }
}

/// Per-sample divergence gradients for a batch of (input, reference) pairs.
///
/// `xs` holds one input per row of `inputs`, `refs` the matching reference
/// output rows. With `parallel` the per-sample backprops run on the rayon
/// pool; results are collected in sample order either way, so the output is
/// identical in both modes.
pub fn per_sample_grads(
    spec: &MlpSpec,
    params: &ParamSet,
    inputs: &[&[f64]],
    refs: &[&[f64]],
    divergence: Divergence,
    parallel: bool,
) -> Result<Vec<Vec<Tensor>>, ModelError> {
    assert_eq!(inputs.len(), refs.len());
    let one = |cache: &mut mlp::SampleCache, x: &[f64], y_r: &[f64]| {
        forward_sample_into(spec, params, x, cache);
        let mut grads = params.zeros_like();
        mlp::backprop_divergence_into(spec, params, y_r, divergence, cache, &mut grads)?;
        Ok(grads)
    };
    if parallel {
        inputs
            .par_iter()
            .zip(refs.par_iter())
            .map_init(
                || mlp::SampleCache::new(spec),
                |cache, (&x, &y_r)| one(cache, x, y_r),
            )
            .collect()
    } else {
        let mut cache = mlp::SampleCache::new(spec);
        inputs
            .iter()
            .zip(refs.iter())
            .map(|(&x, &y_r)| one(&mut cache, x, y_r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngState;

    #[test]
    fn parallel_grads_match_sequential() {
        let spec = MlpSpec::new(
            vec![4, 3, 4],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(55);
        let params = spec.init_params(&mut rng);
        let x = rng.uniform(0.0, 1.0, &[6, 4]).unwrap();
        let y = rng.uniform(0.0, 1.0, &[6, 4]).unwrap();
        let inputs: Vec<&[f64]> = (0..6).map(|s| x.row(s)).collect();
        let refs: Vec<&[f64]> = (0..6).map(|s| y.row(s)).collect();
        let seq = per_sample_grads(&spec, &params, &inputs, &refs, Divergence::Mse, false).unwrap();
        let par = per_sample_grads(&spec, &params, &inputs, &refs, Divergence::Mse, true).unwrap();
        assert_eq!(seq, par);
    }
}
