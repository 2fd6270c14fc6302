use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::Rng;
use secagg_bench::{keypair, params, rng, uniform_pair};
use secagg_core::bfv;
use secagg_core::ring::RingContext;

fn ring_mul(c: &mut Criterion) {
    let mut group = c.benchmark_group("ring_mul");
    for n in [256usize, 1024, 4096, 8192] {
        let ctx = RingContext::new(params(n, 8, 6)).unwrap();
        let (a, b) = uniform_pair(&ctx, n as u64);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("ntt", n), &n, |bch, _| bch.iter(|| a.mul(&b).unwrap()));
        if n <= 1024 {
            group.bench_with_input(BenchmarkId::new("schoolbook", n), &n, |bch, _| {
                bch.iter(|| a.mul_schoolbook(&b))
            });
        }
    }
    group.finish();
}

fn encrypt(c: &mut Criterion) {
    let mut group = c.benchmark_group("bfv");
    for n in [1024usize, 8192] {
        let p = params(n, 8, 6);
        let ctx = RingContext::new(p.clone()).unwrap();
        let (sk, pk) = keypair(&ctx, 7);
        let mut r = rng(11);
        let g: Vec<i64> = (0..n).map(|_| r.gen_range(-1000..=1000)).collect();
        let m = bfv::encode(&g, &p).unwrap().remove(0);
        group.bench_with_input(BenchmarkId::new("encrypt", n), &n, |bch, _| {
            bch.iter(|| bfv::encrypt(&pk, &m, 0, &mut r).unwrap())
        });
        let ct = bfv::encrypt(&pk, &m, 0, &mut r).unwrap();
        group.bench_with_input(BenchmarkId::new("decrypt", n), &n, |bch, _| {
            bch.iter(|| bfv::decrypt(&sk, &ct).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ring_mul, encrypt);
criterion_main!(benches);
