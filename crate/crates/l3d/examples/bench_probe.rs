const WD: f64 = 0.0;
use std::time::Instant;

use l3d::analysis::*;
use l3d::decomp::*;
use l3d::models::*;
use l3d::numkit::{RngState, Tensor};

fn tms_spec() -> MlpSpec {
    MlpSpec::new(
        vec![5, 2, 5],
        vec![Activation::Identity, Activation::Relu],
        vec![false, true],
    )
    .unwrap()
}

fn train_task(
    spec: &MlpSpec,
    task: &ToyTaskSpec,
    seed: u64,
    n_data: usize,
) -> (ParamSet, Vec<f64>) {
    let mut rng = RngState::derive(seed, "data");
    let x = task.gen_inputs(&mut rng, n_data).unwrap();
    let y = task.make_targets(&x).unwrap();
    let data = Dataset::new(x, y).unwrap();
    let mut trng = RngState::derive(seed, "train");
    train_toy(
        spec,
        &data,
        ToyTrainHyper { epochs: 1000, batch: 32, lr: 0.001, weight_decay: WD },
        &mut trng,
    )
    .unwrap()
}

fn decompose(
    spec: &MlpSpec,
    params: &ParamSet,
    task: &ToyTaskSpec,
    seed: u64,
    n_v: usize,
    rank: usize,
) -> (SubnetworkBasis, TrainStats) {
    let mut drng = RngState::derive(seed, "decomp-data");
    let dx = task.gen_inputs(&mut drng, 1000).unwrap();
    let cfg = DecompositionConfig {
        n_v,
        rank,
        k: 0.1,
        epochs: 1000,
        batch: 32,
        lr: 0.01,
        lr_decay: 0.8,
        lr_decay_every: 100,
        divergence: Divergence::Mse,
    };
    let mut lrng = RngState::derive(seed, "l3d");
    train_l3d(spec, params, &dx, &cfg, &mut lrng, false).unwrap()
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let want = |name: &str| which.is_empty() || which.iter().any(|w| w == name);

    if want("tms") {
        let spec = tms_spec();
        let task = ToyTaskSpec {
            kind: TaskKind::Tms, n_i: 5, n_o: 5, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: None, group_size: None,
        };
        let t0 = Instant::now();
        let (params, curve) = train_task(&spec, &task, 0, 10_000);
        println!("TMS train: {:.1}s, final mse {:.5}", t0.elapsed().as_secs_f64(), curve.last().unwrap());
        let t0 = Instant::now();
        let (basis, stats) = decompose(&spec, &params, &task, 0, 5, 1);
        println!("TMS l3d: {:.1}s, final loss {:.4}, p_act {:?}", t0.elapsed().as_secs_f64(), stats.epoch_loss.last().unwrap(), stats.p_act);

        let scores = cosine_alignment(&params, &basis).unwrap();
        let asn = match_subnetworks(&scores, 0.0).unwrap();
        println!("TMS alignment assigned {:?} scores {:?}", asn.assigned, asn.scores);

        // intervention selectivity at |delta|=0.3
        let mut xrng = RngState::derive(0, "intervene");
        let x = task.gen_inputs(&mut xrng, 1000).unwrap();
        let base = forward_outputs(&spec, &params, &x).unwrap();
        for (k, feat) in asn.assigned.iter().enumerate() {
            let Some(feat) = feat else { continue };
            let mut worst: f64 = f64::INFINITY;
            for delta in [0.3, -0.3] {
                let out = intervene(&spec, &params, &basis, k, delta, &x).unwrap();
                let mut diff = out.clone();
                diff.axpy(-1.0, &base).unwrap();
                let mac = l3d::analysis::intervention::mean_abs_change(&diff);
                let matched = mac[*feat];
                let rest: f64 = mac.iter().enumerate().filter(|(i, _)| i != feat).map(|(_, v)| v).sum::<f64>() / (mac.len() - 1) as f64;
                worst = worst.min(matched / rest);
            }
            println!("  subnet {k} -> feature {feat}: min ratio {:.1}", worst);
        }
    }

    if want("tmcs") {
        let spec = MlpSpec::new(vec![10, 5, 10], vec![Activation::Identity, Activation::Relu], vec![false, true]).unwrap();
        let mut arng = RngState::derive(1, "a-matrix");
        let a = arng.uniform(0.0, 3.0, &[10, 10]).unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Tmcs, n_i: 10, n_o: 10, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: Some(a.clone()), group_size: None,
        };
        let t0 = Instant::now();
        let (params, curve) = train_task(&spec, &task, 1, 10_000);
        println!("TMCS train: {:.1}s, final mse {:.5}", t0.elapsed().as_secs_f64(), curve.last().unwrap());
        let t0 = Instant::now();
        let (basis, stats) = decompose(&spec, &params, &task, 1, 10, 1);
        println!("TMCS l3d: {:.1}s, final loss {:.4}, first {:.4}, p_act {:?}", t0.elapsed().as_secs_f64(), stats.epoch_loss.last().unwrap(), stats.epoch_loss[0], stats.p_act);
        let est = extract_coefficients(&spec, &basis).unwrap();
        let feats: Vec<usize> = est.iter().map(|e| e.feature).collect();
        println!("TMCS features {:?} r2 {:.3}", feats, coefficient_r2(&est, &a));
    }

    if want("highrank") {
        let spec = MlpSpec::new(vec![30, 10, 30], vec![Activation::Identity, Activation::Relu], vec![false, true]).unwrap();
        let mut arng = RngState::derive(2, "a-matrix");
        let a = arng.uniform(0.0, 3.0, &[30, 30]).unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::HighRank, n_i: 30, n_o: 30, sparsity: 0.05, lo: 0.0, hi: 1.0,
            a: Some(a.clone()), group_size: Some(5),
        };
        let t0 = Instant::now();
        let (params, curve) = train_task(&spec, &task, 2, 10_000);
        println!("HighRank train: {:.1}s, final mse {:.5}", t0.elapsed().as_secs_f64(), curve.last().unwrap());
        for rank in [1usize, 3, 5] {
            let t0 = Instant::now();
            let (basis, stats) = decompose(&spec, &params, &task, 2, 8, rank);
            println!("HighRank l3d rank {rank}: {:.1}s, final loss {:.4}, p_act {:?}", t0.elapsed().as_secs_f64(), stats.epoch_loss.last().unwrap(), stats.p_act);
            if rank == 3 {
                // impact-based group assignment: one synthetic batch per group
                let mut grng = RngState::derive(2, "groups");
                let mut scores = Tensor::zeros(&[8, 6]);
                for g in 0..6 {
                    let mut x = Tensor::zeros(&[64, 30]);
                    for s in 0..64 {
                        for j in g * 5..(g + 1) * 5 {
                            x.set(&[s, j], grng.uniform_scalar(0.0, 1.0));
                        }
                    }
                    let outs = forward_outputs(&spec, &params, &x).unwrap();
                    for s in 0..64 {
                        let refs: Vec<&[f64]> = (0..4).map(|_| outs.row(grng.next_below(64))).collect();
                        let mi = mean_impact(&spec, &params, &basis, x.row(s), &refs, Divergence::Mse).unwrap();
                        for k in 0..8 {
                            let v = scores.at(&[k, g]) + mi[k] / 64.0;
                            scores.set(&[k, g], v);
                        }
                    }
                }
                let asn = match_subnetworks(&scores, 1e-9).unwrap();
                println!("  rank3 impact assignment {:?} (dead {:?})", asn.assigned, asn.dead);
            }
        }
    }

    if want("square") {
        let spec = MlpSpec::new(
            vec![5, 10, 10, 10, 10, 5],
            vec![Activation::Gelu, Activation::Gelu, Activation::Gelu, Activation::Gelu, Activation::Identity],
            vec![true; 5],
        )
        .unwrap();
        let task = ToyTaskSpec {
            kind: TaskKind::Square, n_i: 5, n_o: 5, sparsity: 0.05, lo: -1.0, hi: 1.0,
            a: None, group_size: None,
        };
        let t0 = Instant::now();
        let (params, curve) = train_task(&spec, &task, 3, 10_000);
        println!("Square train: {:.1}s, final mse {:.6}", t0.elapsed().as_secs_f64(), curve.last().unwrap());
        // max abs error on single-active inputs
        let mut worst: f64 = 0.0;
        for j in 0..5 {
            for t in 0..41 {
                let v = -1.0 + 2.0 * t as f64 / 40.0;
                let mut x = Tensor::zeros(&[1, 5]);
                x.set(&[0, j], v);
                let y = forward_outputs(&spec, &params, &x).unwrap();
                worst = worst.max((y.at(&[0, j]) - v * v).abs());
            }
        }
        println!("Square max abs err on actives: {:.4}", worst);

        let t0 = Instant::now();
        let (basis, stats) = decompose(&spec, &params, &task, 3, 5, 2);
        println!("Square l3d nv5 rank2: {:.1}s, final loss {:.4}, p_act {:?}", t0.elapsed().as_secs_f64(), stats.epoch_loss.last().unwrap(), stats.p_act);

        // intervention selectivity with impact-based matching
        let mut grng = RngState::derive(3, "match");
        let mut scores = Tensor::zeros(&[5, 5]);
        for feat in 0..5 {
            let mut x = Tensor::zeros(&[64, 5]);
            for s in 0..64 {
                x.set(&[s, feat], grng.uniform_scalar(-1.0, 1.0));
            }
            let outs = forward_outputs(&spec, &params, &x).unwrap();
            for s in 0..64 {
                let refs: Vec<&[f64]> = (0..4).map(|_| outs.row(grng.next_below(64))).collect();
                let mi = mean_impact(&spec, &params, &basis, x.row(s), &refs, Divergence::Mse).unwrap();
                for k in 0..5 {
                    let v = scores.at(&[k, feat]) + mi[k] / 64.0;
                    scores.set(&[k, feat], v);
                }
            }
        }
        let asn = match_subnetworks(&scores, 1e-9).unwrap();
        println!("Square impact assignment {:?}", asn.assigned);
        let mut xrng = RngState::derive(3, "intervene");
        let x = task.gen_inputs(&mut xrng, 1000).unwrap();
        let base = forward_outputs(&spec, &params, &x).unwrap();
        for (k, feat) in asn.assigned.iter().enumerate() {
            let Some(feat) = feat else { continue };
            let mut worst: f64 = f64::INFINITY;
            for delta in [0.3, -0.3] {
                let out = intervene(&spec, &params, &basis, k, delta, &x).unwrap();
                let mut diff = out.clone();
                diff.axpy(-1.0, &base).unwrap();
                let mac = l3d::analysis::intervention::mean_abs_change(&diff);
                let matched = mac[*feat];
                let rest: f64 = mac.iter().enumerate().filter(|(i, _)| i != feat).map(|(_, v)| v).sum::<f64>() / (mac.len() - 1) as f64;
                worst = worst.min(matched / rest);
            }
            println!("  subnet {k} -> feature {feat}: min ratio {:.1}", worst);
        }

        // n_v sweep at rank 1
        for n_v in [3usize, 5, 10, 15] {
            let t0 = Instant::now();
            let (_, stats) = decompose(&spec, &params, &task, 3, n_v, 1);
            println!("Square l3d nv{n_v} rank1: {:.1}s, final loss {:.4}", t0.elapsed().as_secs_f64(), stats.epoch_loss.last().unwrap());
        }
    }
}
