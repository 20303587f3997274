const WD: f64 = 0.0;
use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::RngState;

fn main() {
    for (name, dims, seed, amax) in [
        ("TMS", vec![5usize, 2, 5], 0u64, 0.0),
        ("TMCS", vec![10, 5, 10], 1, 3.0),
    ] {
        let n = dims[0];
        let spec = MlpSpec::new(
            dims.clone(),
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let a = if amax > 0.0 {
            let mut arng = RngState::derive(seed, "a-matrix");
            Some(arng.uniform(0.0, amax, &[n, n]).unwrap())
        } else {
            None
        };
        let task = ToyTaskSpec {
            kind: if amax > 0.0 { TaskKind::Tmcs } else { TaskKind::Tms },
            n_i: n,
            n_o: n,
            sparsity: 0.05,
            lo: 0.0,
            hi: 1.0,
            a,
            group_size: None,
        };
        let mut rng = RngState::derive(seed, "data");
        let x = task.gen_inputs(&mut rng, 10_000).unwrap();
        let y = task.make_targets(&x).unwrap();
        let data = Dataset::new(x.clone(), y).unwrap();
        let mut trng = RngState::derive(seed, "train");
        let (params, curve) = train_toy(
            &spec,
            &data,
            ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: WD },
            &mut trng,
        )
        .unwrap();
        println!("== {name}: final mse {:.5}", curve.last().unwrap());
        let b = params.get("b1").unwrap();
        println!("  bias: {:?}", b.data().iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        let w0 = params.get("w0").unwrap();
        for i in 0..n {
            let norm: f64 = (0..dims[1]).map(|h| w0.at(&[h, i]).powi(2)).sum::<f64>().sqrt();
            print!("  |u_{i}|={norm:.3}");
        }
        println!();

        // gradient anatomy over one decomposition-style batch
        let mut drng = RngState::derive(seed, "decomp-data");
        let dx = task.gen_inputs(&mut drng, 1000).unwrap();
        let outs = forward_outputs(&spec, &params, &dx).unwrap();
        let mut prng = RngState::derive(seed, "pairs");
        let mut zero_grad = 0usize;
        let mut b_dominant = 0usize;
        let mut total = 0usize;
        for s in 0..1000 {
            let r = {
                let j = prng.next_below(999);
                if j < s { j } else { j + 1 }
            };
            let g = grad_divergence(&spec, &params, dx.row(s), outs.row(r), Divergence::Mse).unwrap();
            let norms: Vec<f64> = g.iter().map(|t| t.norm()).collect();
            let tot: f64 = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += 1;
            if tot < 1e-12 {
                zero_grad += 1;
            } else if norms[2] * norms[2] > 0.9 * tot * tot {
                b_dominant += 1;
            }
        }
        println!("  grads: {zero_grad}/1000 zero, {b_dominant}/1000 bias-dominated");
    }
}
