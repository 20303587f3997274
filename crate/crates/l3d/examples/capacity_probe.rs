use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::RngState;

fn main() {
    let spec = MlpSpec::new(
        vec![10, 5, 10],
        vec![Activation::Identity, Activation::Relu],
        vec![false, true],
    )
    .unwrap();
    let seed = 1u64;
    let mut arng = RngState::derive(seed, "a-matrix");
    let a = arng.uniform(0.0, 3.0, &[10, 10]).unwrap();
    let task = ToyTaskSpec {
        kind: TaskKind::Tmcs, n_i: 10, n_o: 10, sparsity: 0.05, lo: 0.0, hi: 1.0,
        a: Some(a), group_size: None,
    };
    let mut rng = RngState::derive(seed, "data");
    let x = task.gen_inputs(&mut rng, 10_000).unwrap();
    let y = task.make_targets(&x).unwrap();
    let data = Dataset::new(x, y).unwrap();
    let mut trng = RngState::derive(seed, "train");
    let (params, _) = train_toy(
        &spec, &data,
        ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: 0.0 },
        &mut trng,
    )
    .unwrap();

    for (n_v, rank) in [(10usize, 1usize), (10, 2), (10, 5), (20, 1), (40, 1)] {
        let cfg = DecompositionConfig {
            n_v, rank, k: 0.1, epochs: 1000, batch: 32, lr: 0.01,
            lr_decay: 0.8, lr_decay_every: 100, divergence: Divergence::Mse,
        };
        let mut drng = RngState::derive(seed, "decomp-data");
        let dx = task.gen_inputs(&mut drng, 1000).unwrap();
        let mut lrng = RngState::derive(seed, "l3d");
        let (_, stats) = train_l3d(&spec, &params, &dx, &cfg, &mut lrng, false).unwrap();
        println!("n_v {n_v} rank {rank}: final loss {:.4}", stats.epoch_loss.last().unwrap());
    }
}
