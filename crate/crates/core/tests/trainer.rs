use std::collections::BTreeMap;

use secagg_core::compression::{Moments, PhiSpec, Quantizer, RlcMode};
use secagg_core::protocol::{RoundAvailability, Session, SessionConfig};
use secagg_core::ring::{RingParams, Q60};
use secagg_core::trainer::{
    local_gradient, train, Backend, Compressor, DataConfig, Dataset, RoundCodec, TrainConfig,
};

fn quick(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::desk(4, 2, seed);
    cfg.data.dim = 200;
    cfg.data.samples_per_client = 40;
    cfg.data.test_samples = 400;
    cfg.rounds = 40;
    cfg
}

#[test]
fn identity_compressor_tracks_fedsgd_step_by_step() {
    let mut cfg = quick(1);
    cfg.compressor = Compressor::Identity;
    cfg.error_feedback = false;
    cfg.dropout = 0.0;
    cfg.record_weights = true;
    let report = train(&cfg).unwrap();
    let data = Dataset::generate(&cfg.data).unwrap();
    let half_step = 0.5 / cfg.quantizer.scale;
    let mut w = vec![0.0; cfg.dim()];
    for next in &report.history {
        let mut fedsgd = vec![0.0; cfg.dim()];
        for c in &data.clients {
            for (f, g) in fedsgd.iter_mut().zip(local_gradient(&w, c).unwrap()) {
                *f += cfg.gamma * g / cfg.clients as f64;
            }
        }
        for j in 0..cfg.dim() {
            let taken = w[j] - next[j];
            assert!((taken - fedsgd[j]).abs() <= half_step + 1e-12, "{taken} vs {}", fedsgd[j]);
        }
        w.clone_from(next);
    }
}

#[test]
fn reconstructed_aggregate_is_unbiased() {
    // frozen gradients from 6 clients, 10^3 fresh sketches through the
    // encrypted path; the estimate must centre on the true mean
    let (d, s, alpha, draws) = (8usize, 4usize, 2.0, 1000u32);
    let data = Dataset::generate(&DataConfig {
        clients: 6,
        samples_per_client: 20,
        test_samples: 0,
        dim: d,
        separation: 2.0,
        seed: 4,
    })
    .unwrap();
    let w = vec![0.1; d];
    let grads: Vec<Vec<f64>> = data.clients.iter().map(|c| local_gradient(&w, c).unwrap()).collect();
    let truth: Vec<f64> = (0..d).map(|j| grads.iter().map(|g| g[j]).sum::<f64>() / 6.0).collect();

    let params = RingParams::new(64, Q60, 1 << 30).unwrap().with_smudging(1 << 20);
    let mut session = Session::new(SessionConfig::new(params, 6, 4, 4)).unwrap();
    session.setup().unwrap();
    let quant = Quantizer::new(1e6, 10.0).unwrap();
    let ids = session.client_ids();
    let mut est = vec![Moments::default(); d];
    for t in 1..=draws {
        let spec = PhiSpec::with_alpha(9, t, s, d, alpha).unwrap();
        let codec = RoundCodec::new(Compressor::Rlc(RlcMode::Unbiased), Some(&spec), d, quant).unwrap();
        let inputs: BTreeMap<u16, Vec<i64>> =
            ids.iter().map(|&id| (id, codec.encode(&grads[id as usize]).unwrap())).collect();
        let r = session.run_round(t, &inputs, &RoundAvailability::all(ids.clone())).unwrap();
        let sum = codec.expand(&r.values.unwrap()).unwrap();
        for (m, v) in est.iter_mut().zip(sum) {
            m.push(v / 6.0);
        }
    }
    for j in 0..d {
        let (mean, se) = (est[j].mean(), est[j].se());
        assert!((mean - truth[j]).abs() <= 3.0 * se, "coord {j}: {mean} vs {} (se {se})", truth[j]);
    }
}

#[test]
fn loss_falls_over_every_twenty_round_window() {
    for ratio in [1.0, 5.0, 10.0] {
        let mut cfg = TrainConfig::desk(8, 4, 2);
        cfg.ratio = ratio;
        cfg.backend = Backend::Plain;
        let report = train(&cfg).unwrap();
        let loss: Vec<f64> = report.rounds.iter().map(|r| r.loss).collect();
        for t in 20..loss.len() {
            assert!(loss[t] <= loss[t - 20], "r={ratio}, round {}: {} > {}", t + 1, loss[t], loss[t - 20]);
        }
    }
}

#[test]
fn same_seed_same_csv() {
    let a = train(&quick(5)).unwrap();
    let b = train(&quick(5)).unwrap();
    assert_eq!(a.csv(false), b.csv(false));
    assert_ne!(a.csv(false), train(&quick(6)).unwrap().csv(false));
}

#[test]
fn dropped_clients_keep_their_residual() {
    let mut cfg = quick(7);
    cfg.backend = Backend::Plain;
    cfg.record_weights = true;
    let report = train(&cfg).unwrap();
    let ids: Vec<u16> = (0..cfg.clients as u16).collect();
    let mut frozen = 0;
    for (t, norms) in report.residual_norms.iter().enumerate().skip(1) {
        let round = (t + 1) as u32;
        let avail = RoundAvailability::bernoulli(ids.iter().copied(), cfg.dropout, cfg.seed, round);
        let completed = report.rounds[t].completed;
        for &id in &ids {
            let before = report.residual_norms[t - 1][id as usize];
            if !avail.online.contains(&id) || !completed {
                assert_eq!(norms[id as usize], before, "client {id} round {round}");
                frozen += 1;
            }
        }
    }
    assert!(frozen > 0);
    // an all-offline round leaves the model untouched
    cfg.dropout = 1.0;
    cfg.rounds = 1;
    let r = train(&cfg).unwrap();
    assert!(!r.rounds[0].completed);
    assert!(r.weights.iter().all(|&w| w == 0.0));
}
