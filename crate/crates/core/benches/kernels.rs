use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use saddlecg::bench::{gen_example1, run_sweep, Execution, ProblemSpec, RunConfig, Solver};
use std::hint::black_box;

fn spmv(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmv");
    for n in [1000, 4000] {
        let a = gen_example1(n, 0.02, 1).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| a.spmv_seq(black_box(&x)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| a.spmv_par(black_box(&x)))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let configs: Vec<RunConfig> = (1..=4)
        .flat_map(|seed| {
            Solver::ALL.into_iter().map(move |s| {
                let mut cfg = RunConfig::new(ProblemSpec::Example1 { n: 60, density: 0.2, seed }, s);
                cfg.maxit = 200;
                cfg
            })
        })
        .collect();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_sweep(&configs, Execution::Sequential)));
    group.bench_function("parallel", |b| b.iter(|| run_sweep(&configs, Execution::Parallel)));
    group.finish();
}

criterion_group!(benches, spmv, sweep);
criterion_main!(benches);
