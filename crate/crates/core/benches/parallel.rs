//! Parallel-vs-sequential benchmarks. Placeholder until the batch workloads
//! (per-segment model fitting, scenario sweeps) land; see `exec::map_slice`.

use criterion::{criterion_group, criterion_main, Criterion};
use mixtraffic::exec::{map_slice, ExecMode};

fn bench_map(c: &mut Criterion) {
    let items: Vec<u64> = (0..4096).collect();
    let work = |x: &u64| -> u64 {
        let mut acc = *x;
        for _ in 0..512 {
            acc = acc.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        }
        acc
    };
    let mut group = c.benchmark_group("map_slice");
    group.bench_function("sequential", |b| {
        b.iter(|| map_slice(ExecMode::Sequential, &items, work))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| map_slice(ExecMode::Parallel, &items, work))
    });
    group.finish();
}

criterion_group!(benches, bench_map);
criterion_main!(benches);
