//! Toy-model training: plain minibatch MSE with AdamW.

use crate::models::data::Dataset;
use crate::models::divergence::Divergence;
use crate::models::mlp::{backprop_divergence_into, forward_sample_into, MlpSpec, ParamSet, SampleCache};
use crate::models::ModelError;
use crate::numkit::{AdamW, AdamWParams, RngState};

/// Hyperparameters for toy-model training.
#[derive(Debug, Clone, Copy)]
pub struct ToyTrainHyper {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for ToyTrainHyper {
    fn default() -> Self {
        ToyTrainHyper {
            epochs: 1000,
            batch: 32,
            lr: 0.001,
            weight_decay: 0.0,
        }
    }
}

/// Train an MLP on a dataset, returning the final parameters and the
/// per-epoch mean training MSE.
///
/// Training shuffles the sample order every epoch with the supplied
/// generator, so the whole run is a deterministic function of
/// (spec, data, hyper, rng).
pub fn train_toy(
    spec: &MlpSpec,
    data: &Dataset,
    hyper: ToyTrainHyper,
    rng: &mut RngState,
) -> Result<(ParamSet, Vec<f64>), ModelError> {
    if data.x.shape()[1] != spec.input_dim() || data.y.shape()[1] != spec.output_dim() {
        return Err(ModelError::Shape(format!(
            "dataset {:?}/{:?} does not match model dims {:?}",
            data.x.shape(),
            data.y.shape(),
            spec.dims
        )));
    }
    if hyper.batch == 0 || hyper.epochs == 0 {
        return Err(ModelError::Spec("epochs and batch must be positive".into()));
    }

    let mut params = spec.init_params(rng);
    let labels: Vec<String> = params.names().map(String::from).collect();
    let mut adamw = AdamWParams::with_lr(hyper.lr);
    adamw.weight_decay = hyper.weight_decay;
    let mut opt = AdamW::new(adamw, params.tensors(), labels);

    let n = data.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    let mut cache = SampleCache::new(spec);
    let mut grads = params.zeros_like();
    let mut loss_curve = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch) {
            for g in grads.iter_mut() {
                g.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &s in batch {
                forward_sample_into(spec, &params, data.x.row(s), &mut cache);
                batch_loss += Divergence::Mse.value(cache.output(), data.y.row(s))?;
                backprop_divergence_into(
                    spec,
                    &params,
                    data.y.row(s),
                    Divergence::Mse,
                    &mut cache,
                    &mut grads,
                )?;
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grads.iter_mut() {
                g.scale(inv);
            }
            epoch_loss += batch_loss;
            opt.step(params.tensors_mut(), &grads)?;
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                loss: mean_loss,
            });
        }
        loss_curve.push(mean_loss);
    }
    Ok((params, loss_curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::data::{TaskKind, ToyTaskSpec};
    use crate::models::mlp::Activation;

    #[test]
    fn learns_a_tiny_linear_map() {
        // 2→2 identity task, dense inputs: a linear layer must fit it fast.
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Identity], vec![false]).unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Tms,
            n_i: 2,
            n_o: 2,
            sparsity: 1.0,
            lo: 0.0,
            hi: 1.0,
            a: None,
            group_size: None,
        };
        let mut rng = RngState::new(100);
        let x = task.gen_inputs(&mut rng, 256).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let hyper = ToyTrainHyper {
            weight_decay: 0.0,
            epochs: 200,
            batch: 32,
            lr: 0.01,
        };
        let (_, curve) = train_toy(&spec, &data, hyper, &mut rng).unwrap();
        assert!(curve.last().unwrap() < &1e-3, "final loss {}", curve.last().unwrap());
        assert!(curve.last().unwrap() < &curve[0]);
    }

    #[test]
    fn divergence_aborts_with_epoch() {
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Identity], vec![false]).unwrap();
        let mut rng = RngState::new(100);
        let x = rng.uniform(0.0, 1.0, &[64, 2]).unwrap();
        let data = Dataset::new(x.clone(), x).unwrap();
        let hyper = ToyTrainHyper {
            weight_decay: 0.0,
            epochs: 50,
            batch: 8,
            lr: 1e300,
        };
        match train_toy(&spec, &data, hyper, &mut rng) {
            Err(ModelError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
