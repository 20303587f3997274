use l3d::analysis::*;
use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::RngState;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let wd: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let lo: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let hi: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);

    for seed in lo..hi {
        let spec = MlpSpec::new(
            vec![10, 5, 10],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut arng = RngState::derive(seed, "a-matrix");
        let a = arng.uniform(0.0, 3.0, &[10, 10]).unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Tmcs, n_i: 10, n_o: 10, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: Some(a.clone()), group_size: None,
        };
        let mut rng = RngState::derive(seed, "data");
        let x = task.gen_inputs(&mut rng, 10_000).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let mut trng = RngState::derive(seed, "train");
        let (params, curve) = train_toy(
            &spec, &data,
            ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: wd },
            &mut trng,
        )
        .unwrap();

        let cfg = DecompositionConfig {
            n_v: 10, rank: 1, k: 0.1, epochs: 1000, batch: 32, lr: 0.01,
            lr_decay: 0.8, lr_decay_every: 100, divergence: Divergence::Mse,
        };
        let mut drng = RngState::derive(seed, "decomp-data");
        let dx = task.gen_inputs(&mut drng, 1000).unwrap();
        let mut lrng = RngState::derive(seed, "l3d");
        let (basis, stats) = train_l3d(&spec, &params, &dx, &cfg, &mut lrng, false).unwrap();
        let est = extract_coefficients(&spec, &basis).unwrap();
        let mut feats: Vec<usize> = est.iter().map(|e| e.feature).collect();
        feats.sort_unstable();
        feats.dedup();
        println!(
            "wd {wd} seed {seed}: mse {:.4}, l3d loss {:.4}, r2 {:.3}, distinct features {}",
            curve.last().unwrap(),
            stats.epoch_loss.last().unwrap(),
            coefficient_r2(&est, &a),
            feats.len(),
        );
    }
}
