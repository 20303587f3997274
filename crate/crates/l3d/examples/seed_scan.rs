use l3d::models::*;
const WD: f64 = 0.0;
use l3d::numkit::RngState;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lo: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let hi: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);

    println!("TMS seed scan:");
    for seed in lo..hi {
        let spec = MlpSpec::new(
            vec![5, 2, 5],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Tms, n_i: 5, n_o: 5, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: None, group_size: None,
        };
        let mut rng = RngState::derive(seed, "data");
        let x = task.gen_inputs(&mut rng, 10_000).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let mut trng = RngState::derive(seed, "train");
        let (params, curve) = train_toy(
            &spec, &data,
            ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: WD },
            &mut trng,
        )
        .unwrap();
        let w0 = params.get("w0").unwrap();
        let norms: Vec<f64> = (0..5)
            .map(|i| (0..2).map(|h| w0.at(&[h, i]).powi(2)).sum::<f64>().sqrt())
            .collect();
        let alive = norms.iter().filter(|&&n| n > 0.5).count();
        println!(
            "  seed {seed}: mse {:.5}, alive {alive}/5, norms {:?}",
            curve.last().unwrap(),
            norms.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }

    println!("TMCS seed scan:");
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
            a: Some(a), group_size: None,
        };
        let mut rng = RngState::derive(seed, "data");
        let x = task.gen_inputs(&mut rng, 10_000).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x, y).unwrap();
        let mut trng = RngState::derive(seed, "train");
        let (params, curve) = train_toy(
            &spec, &data,
            ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: WD },
            &mut trng,
        )
        .unwrap();
        let b = params.get("b1").unwrap();
        let n_pos = b.data().iter().filter(|&&v| v > 0.0).count();
        let max_pos = b.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "  seed {seed}: mse {:.5}, positive biases {n_pos}/10 (max {max_pos:+.4})",
            curve.last().unwrap()
        );
    }
}
