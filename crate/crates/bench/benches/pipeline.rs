use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latsim_bench::bench_config;
use latsim_core::{compute_report, generate, greedy_fair_rerank, Execution};

fn bench_generate(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    let cfg = bench_config(5_000, 1_000, false);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| generate(black_box(&cfg), exec).unwrap()),
        );
    }
    group.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let cfg = bench_config(5_000, 1_000, true);
    let run = generate(&cfg, Execution::Parallel).unwrap();
    let protected = run.protected();
    c.bench_function("compute_report", |b| {
        b.iter(|| compute_report(black_box(&run.lists), &protected, cfg.regimes.len()).unwrap())
    });
    c.bench_function("greedy_fair_rerank", |b| {
        b.iter(|| {
            for list in &run.lists {
                black_box(greedy_fair_rerank(list, 0.5, 0).unwrap());
            }
        })
    });
}

criterion_group!(benches, bench_generate, bench_metrics);
criterion_main!(benches);
