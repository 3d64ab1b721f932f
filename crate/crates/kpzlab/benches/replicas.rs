use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kpzlab::environment::{sample_brownian, RngSpec};
use kpzlab::montecarlo::{par_map, seq_map};
use kpzlab::representations::brownian_representation;

/// One replica: sample a Brownian environment and build its validated
/// representation.
fn replica(i: usize, n: usize) -> f64 {
    let env = sample_brownian(n, 0.0, 0.05, 31, RngSpec::new(11, i as u64)).unwrap();
    let rep = brownian_representation(&env).unwrap();
    rep.sheet(0.5, 1.5).unwrap()
}

fn bench_replicas(c: &mut Criterion) {
    let mut group = c.benchmark_group("bl_replicas");
    group.sample_size(10);
    for &count in &[16usize, 64] {
        group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &count| {
            b.iter(|| seq_map(count, |i| replica(i, 3)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &count| {
            b.iter(|| par_map(count, |i| replica(i, 3)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_replicas);
criterion_main!(benches);
