use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dopd::harness::{run_seed, RunConfig};
use dopd::parallel::Executor;
use dopd::primal_dual::Algorithm;

fn config(n: usize) -> RunConfig {
    RunConfig {
        algo: Algorithm::OnePoint,
        horizon: 200,
        n,
        seeds: vec![1],
        stride: 50,
        ..RunConfig::desk()
    }
}

fn executors(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_seed");
    group.sample_size(10);
    for n in [10, 100] {
        let cfg = config(n);
        for (name, executor) in [("sequential", Executor::Sequential), ("parallel", Executor::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &cfg, |b, cfg| {
                b.iter(|| run_seed(cfg, 1, executor).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, executors);
criterion_main!(benches);
