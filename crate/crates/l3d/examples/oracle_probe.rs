const WD: f64 = 0.0;
use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::{RngState, Tensor};

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
        a: Some(a.clone()), group_size: None,
    };
    let mut rng = RngState::derive(seed, "data");
    let x = task.gen_inputs(&mut rng, 10_000).unwrap();
    let y = task.make_targets(&x).unwrap();
    let data = Dataset::new(x, y).unwrap();
    let mut trng = RngState::derive(seed, "train");
    let (params, _) = train_toy(
        &spec, &data,
        ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: WD },
        &mut trng,
    )
    .unwrap();

    // hand-built per-feature basis from the trained weights:
    //   w0 block: (w1ᵀ a_i) ⊗ e_i,  w1 block: a_i ⊗ u_i,  b block: a_i
    let w0 = params.get("w0").unwrap();
    let w1 = params.get("w1").unwrap();
    let mut in_blocks = Vec::new();
    let mut out_blocks = Vec::new();
    for i in 0..10 {
        let u_i: Vec<f64> = (0..5).map(|h| w0.at(&[h, i])).collect();
        let a_i: Vec<f64> = (0..10).map(|j| a.at(&[j, i])).collect();
        let wt_a: Vec<f64> = (0..5)
            .map(|h| (0..10).map(|j| w1.at(&[j, h]) * a_i[j]).sum())
            .collect();
        let mut e_i = vec![0.0; 10];
        e_i[i] = 1.0;
        let enc = TuckerTensor::from_parts(
            vec![5, 10],
            Tensor::from_vec(&[1, 1], vec![1.0]),
            vec![
                Tensor::from_vec(&[5, 1], wt_a.clone()),
                Tensor::from_vec(&[10, 1], e_i),
            ],
        )
        .unwrap();
        let dec = TuckerTensor::from_parts(
            vec![10, 5],
            Tensor::from_vec(&[1, 1], vec![1.0]),
            vec![
                Tensor::from_vec(&[10, 1], a_i.clone()),
                Tensor::from_vec(&[5, 1], u_i),
            ],
        )
        .unwrap();
        let bias = TuckerTensor::from_parts(
            vec![10],
            Tensor::from_vec(&[1], vec![1.0]),
            vec![Tensor::from_vec(&[10, 1], a_i)],
        )
        .unwrap();
        in_blocks.push(vec![enc.clone(), dec.clone(), bias.clone()]);
        out_blocks.push(vec![enc, dec, bias]);
    }
    let mut oracle = SubnetworkBasis::from_parts(
        vec!["w0".into(), "w1".into(), "b1".into()],
        in_blocks,
        out_blocks,
    )
    .unwrap();
    oracle.normalize_out().unwrap();
    // in transform = the unit out directions, so coefficients are proper
    // projections onto each direction
    let names: Vec<String> = oracle.tensor_names().to_vec();
    let normalized_out: Vec<Vec<TuckerTensor>> =
        (0..10).map(|k| oracle.out_blocks(k).to_vec()).collect();
    let oracle = SubnetworkBasis::from_parts(
        names,
        normalized_out.clone(),
        normalized_out,
    )
    .unwrap();

    // geometric lower bound: per sample, residual of the best single-unit-
    // direction least-squares fit, pooled over the batch
    {
        let outs = forward_outputs(&spec, &params, {
            let mut drng = RngState::derive(seed, "decomp-data");
            &task.gen_inputs(&mut drng, 1000).unwrap().clone()
        })
        .unwrap();
        let mut drng = RngState::derive(seed, "decomp-data");
        let dx = task.gen_inputs(&mut drng, 1000).unwrap();
        let mut prng = RngState::derive(seed, "lbpairs");
        let dirs: Vec<Vec<Tensor>> = (0..10).map(|k| oracle.materialize_out(k)).collect();
        let mut res_sq = 0.0;
        let mut g_sq = 0.0;
        for s in 0..1000 {
            let r = {
                let j = prng.next_below(999);
                if j < s { j } else { j + 1 }
            };
            let g = grad_divergence(&spec, &params, dx.row(s), outs.row(r), Divergence::Mse)
                .unwrap();
            let gn: f64 = g.iter().map(|t| t.norm_sq()).sum();
            let mut best = 0.0f64;
            for d in &dirs {
                let c: f64 = d.iter().zip(&g).map(|(a, b)| a.dot(b).unwrap()).sum();
                best = best.max(c * c);
            }
            res_sq += gn - best;
            g_sq += gn;
        }
        println!(
            "best single-direction fit bound: {:.4}",
            (res_sq.max(0.0) / g_sq).sqrt()
        );
    }

    let cfg = DecompositionConfig {
        n_v: 10, rank: 1, k: 0.1, epochs: 1000, batch: 32, lr: 0.01,
        lr_decay: 0.8, lr_decay_every: 100, divergence: Divergence::Mse,
    };
    let mut drng = RngState::derive(seed, "decomp-data");
    let dx = task.gen_inputs(&mut drng, 1000).unwrap();
    let mut erng = RngState::derive(seed, "evalpairs");
    let oracle_loss =
        eval_recon_loss(&spec, &params, &oracle, &dx, &cfg, &mut erng, false).unwrap();
    println!("oracle per-feature basis loss: {oracle_loss:.4}");

    // learned basis for comparison, with its per-epoch curve tail
    let mut lrng = RngState::derive(seed, "l3d");
    let (basis, stats) = train_l3d(&spec, &params, &dx, &cfg, &mut lrng, false).unwrap();
    println!(
        "learned basis: final {:.4}, curve[100,200,400,600,800,999] = {:?}",
        stats.epoch_loss.last().unwrap(),
        [100, 200, 400, 600, 800, 999]
            .iter()
            .map(|&e| (stats.epoch_loss[e] * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    let mut erng = RngState::derive(seed, "evalpairs");
    let learned_eval =
        eval_recon_loss(&spec, &params, &basis, &dx, &cfg, &mut erng, false).unwrap();
    println!("learned basis eval loss on same pairs: {learned_eval:.4}");
}
