use l3d::analysis::*;
use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::RngState;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().cloned().unwrap_or_else(|| "model".into());

    let build = |model_seed: u64| {
        let spec = MlpSpec::new(
            vec![10, 5, 10],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut arng = RngState::derive(model_seed, "a-matrix");
        let a = arng.uniform(0.0, 3.0, &[10, 10]).unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Tmcs, n_i: 10, n_o: 10, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: Some(a.clone()), group_size: None,
        };
        let mut rng = RngState::derive(model_seed, "data");
        let x = task.gen_inputs(&mut rng, 10_000).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let mut trng = RngState::derive(model_seed, "train");
        let (params, curve) = train_toy(
            &spec, &data,
            ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: 0.0 },
            &mut trng,
        )
        .unwrap();
        (spec, a, task, params, *curve.last().unwrap())
    };

    let decomp = |spec: &MlpSpec, task: &ToyTaskSpec, params: &ParamSet, dseed: u64| {
        let cfg = DecompositionConfig {
            n_v: 10, rank: 1, k: 0.1, epochs: 1000, batch: 32, lr: 0.01,
            lr_decay: 0.8, lr_decay_every: 100, divergence: Divergence::Mse,
        };
        let mut drng = RngState::derive(dseed, "decomp-data");
        let dx = task.gen_inputs(&mut drng, 1000).unwrap();
        let mut lrng = RngState::derive(dseed, "l3d");
        let (basis, stats) = train_l3d(spec, params, &dx, &cfg, &mut lrng, false).unwrap();
        (basis, *stats.epoch_loss.last().unwrap())
    };

    if mode == "decompseeds" {
        let model_seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
        let (spec, a, task, params, mse) = build(model_seed);
        println!("model seed {model_seed} mse {mse:.4}");
        for dseed in 100..105 {
            let (basis, loss) = decomp(&spec, &task, &params, dseed);
            let est = extract_coefficients(&spec, &basis).unwrap();
            println!("  dseed {dseed}: loss {loss:.4} r2 {:.3}", coefficient_r2(&est, &a));
        }
    } else {
        let lo: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
        let hi: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
        for seed in lo..hi {
            let (spec, a, task, params, mse) = build(seed);
            let (basis, loss) = decomp(&spec, &task, &params, seed);
            let est = extract_coefficients(&spec, &basis).unwrap();
            println!(
                "model seed {seed}: mse {mse:.4} loss {loss:.4} r2 {:.3}",
                coefficient_r2(&est, &a)
            );
        }
    }
}
