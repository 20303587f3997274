//! The decomposition training loop: per minibatch, pair every sample with a
//! random reference from the same batch, compute divergence gradients at the
//! frozen model parameters, project, select top-k, reconstruct, and update
//! the basis by AdamW on the norm-ratio loss; out directions are
//! renormalized after every step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decomp::basis::SubnetworkBasis;
use crate::decomp::loss::loss_gradients;
use crate::decomp::DecompError;
use crate::models::{forward_outputs, per_sample_grads, Divergence, MlpSpec, ParamSet};
use crate::numkit::{AdamW, AdamWParams, RngState, Tensor};

/// Decomposition hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    /// Number of subnetworks.
    pub n_v: usize,
    /// Tucker rank (clipped to each mode extent).
    pub rank: usize,
    /// Top-k fraction over the batch×subnetwork coefficient grid.
    pub k: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Learning-rate multiplier applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub divergence: Divergence,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            n_v: 5,
            rank: 1,
            k: 0.1,
            epochs: 1000,
            batch: 32,
            lr: 0.01,
            lr_decay: 0.8,
            lr_decay_every: 100,
            divergence: Divergence::Mse,
        }
    }
}

impl DecompositionConfig {
    /// Reject configurations that cannot run: empty selections, unpaired
    /// batches, bad ranges.
    pub fn validate(&self, n_data: usize) -> Result<(), DecompError> {
        if self.n_v == 0 || self.rank == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(DecompError::Config(
                "n_v, rank, epochs, and batch must be positive".into(),
            ));
        }
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(DecompError::Config(format!("k = {} outside (0, 1]", self.k)));
        }
        if !(self.lr > 0.0) || !(self.lr_decay > 0.0) || self.lr_decay_every == 0 {
            return Err(DecompError::Config("bad learning-rate schedule".into()));
        }
        if n_data < 2 {
            return Err(DecompError::Config("need at least 2 samples".into()));
        }
        // every batch (including a trailing short one) must pair samples and
        // keep at least one coefficient after masking
        let runt = n_data % self.batch;
        for b in [self.batch.min(n_data), if runt > 0 { runt } else { self.batch }] {
            if b == 1 {
                return Err(DecompError::Config(
                    "a batch of size 1 cannot pair references; adjust n_data or batch".into(),
                ));
            }
            if (self.k * (b * self.n_v) as f64).floor() < 1.0 {
                return Err(DecompError::Config(format!(
                    "k·batch·n_v = {:.3} selects nothing for batch size {b}",
                    self.k * (b * self.n_v) as f64
                )));
            }
        }
        Ok(())
    }
}

/// Training telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Mean reconstruction loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Final-epoch activation fraction per subnetwork.
    pub p_act: Vec<f64>,
    /// Wall-clock milliseconds per epoch (excluded from deterministic
    /// report payloads).
    pub epoch_ms: Vec<f64>,
}

/// For each batch position, a uniformly chosen reference position ≠ itself.
pub fn pair_references(rng: &mut RngState, batch_len: usize) -> Result<Vec<usize>, DecompError> {
    if batch_len < 2 {
        return Err(DecompError::Config(
            "reference pairing needs a batch of at least 2".into(),
        ));
    }
    Ok((0..batch_len)
        .map(|i| {
            let j = rng.next_below(batch_len - 1);
            if j < i {
                j
            } else {
                j + 1
            }
        })
        .collect())
}

/// Per-subnetwork fraction of samples whose mask row included it.
pub fn compute_pact(counts: &[u64], n_samples: u64) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| {
            if n_samples == 0 {
                0.0
            } else {
                c as f64 / n_samples as f64
            }
        })
        .collect()
}

/// Learn a subnetwork basis for a trained model on the given inputs.
///
/// References are other samples' outputs at the frozen parameters, so the
/// whole per-epoch output table is precomputed once. The run is a
/// deterministic function of (model, inputs, config, rng); `parallel` only
/// moves per-sample gradient work onto the rayon pool without changing any
/// result bit.
pub fn train_l3d(
    spec: &MlpSpec,
    params: &ParamSet,
    inputs: &Tensor,
    config: &DecompositionConfig,
    rng: &mut RngState,
    parallel: bool,
) -> Result<(SubnetworkBasis, TrainStats), DecompError> {
    let n_data = inputs.shape()[0];
    config.validate(n_data)?;
    if inputs.shape()[1] != spec.input_dim() {
        return Err(DecompError::Shape(format!(
            "inputs {:?} do not match model input dim {}",
            inputs.shape(),
            spec.input_dim()
        )));
    }

    // outputs at the frozen parameters W0, the reference pool
    let outputs = forward_outputs(spec, params, inputs).map_err(DecompError::Model)?;

    let mut basis = SubnetworkBasis::init_uniform(params, config.n_v, config.rank, rng)?;
    let labels = basis.component_labels();
    let init_components: Vec<Tensor> = basis.component_tensors().into_iter().cloned().collect();
    let mut opt = AdamW::new(AdamWParams::with_lr(config.lr), &init_components, labels);

    let mut order: Vec<usize> = (0..n_data).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut epoch_ms = Vec::with_capacity(config.epochs);
    let mut act_counts = vec![0u64; config.n_v];
    let mut act_samples = 0u64;

    for epoch in 0..config.epochs {
        let t0 = Instant::now();
        opt.hyper.lr = config.lr * config.lr_decay.powi((epoch / config.lr_decay_every) as i32);
        rng.shuffle(&mut order);
        let final_epoch = epoch + 1 == config.epochs;
        let mut loss_sum = 0.0;

        for batch in order.chunks(config.batch) {
            let refs = pair_references(rng, batch.len())?;
            let xs: Vec<&[f64]> = batch.iter().map(|&s| inputs.row(s)).collect();
            let ys: Vec<&[f64]> = refs.iter().map(|&r| outputs.row(batch[r])).collect();
            let grads = per_sample_grads(spec, params, &xs, &ys, config.divergence, parallel)
                .map_err(DecompError::Model)?;

            let (bg, mask) = loss_gradients(&basis, &grads, config.k)?;
            loss_sum += bg.loss * batch.len() as f64;

            if final_epoch {
                act_samples += batch.len() as u64;
                for (s, _) in batch.iter().enumerate() {
                    for (v, count) in act_counts.iter_mut().enumerate() {
                        if mask.is_selected(s, v) {
                            *count += 1;
                        }
                    }
                }
            }

            let mut comps = basis.component_tensors_mut();
            opt.step_refs(&mut comps, &bg.components)?;
            drop(comps);
            basis.normalize_out()?;
        }

        let mean = loss_sum / n_data as f64;
        if !mean.is_finite() {
            return Err(DecompError::Diverged { epoch, loss: mean });
        }
        epoch_loss.push(mean);
        epoch_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let p_act = compute_pact(&act_counts, act_samples);
    Ok((
        basis,
        TrainStats {
            epoch_loss,
            p_act,
            epoch_ms,
        },
    ))
}

/// One evaluation pass of the reconstruction loss over a dataset, without
/// updates: pair references, project, mask, reconstruct, norm-ratio loss.
pub fn eval_recon_loss(
    spec: &MlpSpec,
    params: &ParamSet,
    basis: &SubnetworkBasis,
    inputs: &Tensor,
    config: &DecompositionConfig,
    rng: &mut RngState,
    parallel: bool,
) -> Result<f64, DecompError> {
    let n_data = inputs.shape()[0];
    config.validate(n_data)?;
    let outputs = forward_outputs(spec, params, inputs).map_err(DecompError::Model)?;
    let order: Vec<usize> = (0..n_data).collect();
    let mut loss_sum = 0.0;
    for batch in order.chunks(config.batch) {
        let refs = pair_references(rng, batch.len())?;
        let xs: Vec<&[f64]> = batch.iter().map(|&s| inputs.row(s)).collect();
        let ys: Vec<&[f64]> = refs.iter().map(|&r| outputs.row(batch[r])).collect();
        let grads = per_sample_grads(spec, params, &xs, &ys, config.divergence, parallel)
            .map_err(DecompError::Model)?;
        let (bg, _) = loss_gradients(basis, &grads, config.k)?;
        loss_sum += bg.loss * batch.len() as f64;
    }
    Ok(loss_sum / n_data as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Activation;

    #[test]
    fn pairing_in_a_batch_of_two_is_forced() {
        let mut rng = RngState::new(1);
        for _ in 0..20 {
            let refs = pair_references(&mut rng, 2).unwrap();
            assert_eq!(refs, vec![1, 0]);
        }
    }

    #[test]
    fn pairing_never_selects_self_and_is_uniform() {
        let mut rng = RngState::new(2);
        let batch = 32;
        let draws = 10_000;
        let mut counts = vec![vec![0u32; batch]; batch];
        for _ in 0..draws {
            let refs = pair_references(&mut rng, batch).unwrap();
            for (i, &r) in refs.iter().enumerate() {
                assert_ne!(i, r);
                counts[i][r] += 1;
            }
        }
        // each (i, r≠i) cell is binomial with p = 1/31
        let p = 1.0 / (batch - 1) as f64;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for i in 0..batch {
            for r in 0..batch {
                if i == r {
                    assert_eq!(counts[i][r], 0);
                } else {
                    let c = counts[i][r] as f64;
                    assert!(
                        (c - expect).abs() < 4.0 * sigma,
                        "cell ({i},{r}): {c} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn pairing_is_deterministic_under_a_fixed_seed() {
        let mut a = RngState::new(77);
        let mut b = RngState::new(77);
        assert_eq!(
            pair_references(&mut a, 16).unwrap(),
            pair_references(&mut b, 16).unwrap()
        );
    }

    #[test]
    fn pairing_rejects_singleton_batches() {
        let mut rng = RngState::new(3);
        assert!(pair_references(&mut rng, 1).is_err());
    }

    #[test]
    fn pact_counts_dead_and_full() {
        assert_eq!(compute_pact(&[0, 50, 100], 100), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn config_validation_catches_empty_selection_and_runt_batches() {
        let mut cfg = DecompositionConfig {
            n_v: 2,
            k: 0.01,
            batch: 8,
            ..DecompositionConfig::default()
        };
        // floor(0.01·8·2) = 0
        assert!(matches!(cfg.validate(64), Err(DecompError::Config(_))));
        cfg.k = 0.5;
        assert!(cfg.validate(64).is_ok());
        // 65 % 8 = 1: trailing singleton batch
        assert!(matches!(cfg.validate(65), Err(DecompError::Config(_))));
    }

    #[test]
    fn tiny_decomposition_runs_and_reduces_loss() {
        let spec = MlpSpec::new(
            vec![3, 2, 3],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(9);
        let params = spec.init_params(&mut rng);
        let inputs = rng.uniform(0.0, 1.0, &[40, 3]).unwrap();
        let config = DecompositionConfig {
            n_v: 3,
            rank: 1,
            k: 0.5,
            epochs: 30,
            batch: 8,
            lr: 0.01,
            lr_decay: 0.8,
            lr_decay_every: 10,
            divergence: Divergence::Mse,
        };
        let (basis, stats) = train_l3d(&spec, &params, &inputs, &config, &mut rng, false).unwrap();
        assert_eq!(stats.epoch_loss.len(), 30);
        assert!(stats.epoch_loss.iter().all(|l| l.is_finite()));
        assert!(stats.epoch_loss[29] < stats.epoch_loss[0]);
        assert_eq!(stats.p_act.len(), 3);
        assert!(stats.p_act.iter().all(|&p| (0.0..=1.0).contains(&p)));
        for k in 0..3 {
            assert!((basis.out_norm(k) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn reruns_with_the_same_seed_are_bit_identical() {
        let spec = MlpSpec::new(
            vec![3, 2, 3],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(10);
        let params = spec.init_params(&mut rng);
        let inputs = rng.uniform(0.0, 1.0, &[24, 3]).unwrap();
        let config = DecompositionConfig {
            n_v: 2,
            rank: 1,
            k: 0.5,
            epochs: 5,
            batch: 8,
            lr: 0.01,
            lr_decay: 0.8,
            lr_decay_every: 2,
            divergence: Divergence::Mse,
        };
        let run = |par: bool| {
            let mut r = RngState::new(123);
            train_l3d(&spec, &params, &inputs, &config, &mut r, par).unwrap()
        };
        let (b1, s1) = run(false);
        let (b2, s2) = run(false);
        assert_eq!(b1, b2);
        assert_eq!(s1.epoch_loss, s2.epoch_loss);
        // the parallel mode reduces in fixed order, so it matches too
        let (b3, s3) = run(true);
        assert_eq!(b1, b3);
        assert_eq!(s1.epoch_loss, s3.epoch_loss);
    }
}
