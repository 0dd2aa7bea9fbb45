use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kamtori_bench::scenario;
use kamtori_core::divisors::{critical_gamma, frequencies_at, surviving_set_sweep};
use std::hint::black_box;

fn scan(c: &mut Criterion) {
    let sc = scenario("ex43");
    let (omega, spec) = frequencies_at(&sc.n_full, &sc.chart, &[1.3, 1.7]).unwrap();
    let mut g = c.benchmark_group("critical_gamma");
    for k in [4, 8, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| b.iter(|| black_box(critical_gamma(&omega, &spec, sc.kam.tau, k))));
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let sc = scenario("ex41-line");
    let gammas = [1e-2, 1e-3, 1e-4];
    c.bench_function("sweep_ex41_1000", |b| {
        b.iter(|| black_box(surviving_set_sweep(&sc.n_full, &sc.chart, &gammas, sc.kam.tau, 8, &[1000]).unwrap()))
    });
}

criterion_group!(benches, scan, sweep);
criterion_main!(benches);
