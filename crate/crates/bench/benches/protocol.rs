use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use secagg_bench::params;
use secagg_core::compression::{PhiSpec, Phi};
use secagg_core::protocol::{synthetic_input, RoundAvailability, Session, SessionConfig};

fn round(c: &mut Criterion) {
    let mut group = c.benchmark_group("round");
    group.sample_size(10);
    for (clients, threshold) in [(4usize, 3usize), (8, 6), (16, 11)] {
        let dim = 10_000;
        let mut session = Session::new(SessionConfig::new(params(4096, clients, threshold), clients, threshold, 3)).unwrap();
        session.setup().unwrap();
        let ids = session.client_ids();
        let inputs: BTreeMap<u16, Vec<i64>> = ids.iter().map(|&id| (id, synthetic_input(3, id, 1, dim, 1000))).collect();
        let avail = RoundAvailability::all(ids);
        let mut t = 0;
        group.bench_with_input(BenchmarkId::new("full_availability", clients), &clients, |b, _| {
            b.iter(|| {
                t += 1;
                session.run_round(t, &inputs, &avail).unwrap()
            })
        });
    }
    group.finish();
}

fn setup(c: &mut Criterion) {
    let mut group = c.benchmark_group("setup");
    group.sample_size(10);
    for clients in [4usize, 8, 16] {
        let threshold = clients / 2 + 1;
        let cfg = SessionConfig::new(params(4096, clients, threshold), clients, threshold, 5);
        group.bench_with_input(BenchmarkId::from_parameter(clients), &clients, |b, _| {
            b.iter_batched(|| Session::new(cfg.clone()).unwrap(), |mut s| s.setup().unwrap(), BatchSize::LargeInput)
        });
    }
    group.finish();
}

fn sketch(c: &mut Criterion) {
    let mut group = c.benchmark_group("sketch");
    let d = 10_000;
    for r in [5usize, 50] {
        let spec = PhiSpec::with_alpha(1, 1, d / r, d, 0.1).unwrap();
        let phi = Phi::generate(&spec).unwrap();
        let x: Vec<f64> = (0..d).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::new("generate", r), &r, |b, _| b.iter(|| Phi::generate(&spec).unwrap()));
        group.bench_with_input(BenchmarkId::new("apply", r), &r, |b, _| b.iter(|| phi.apply(&x).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, round, setup, sketch);
criterion_main!(benches);
