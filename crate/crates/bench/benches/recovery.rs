use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vset_bench::{planted, simplex_fixture};
use vset_core::linalg::dot;
use vset_core::{decompose, lasso_at, Atoms, LassoConfig};

fn bench_decompose(c: &mut Criterion) {
    let cfg = LassoConfig::default();
    let mut g = c.benchmark_group("decompose");
    g.sample_size(10);
    for (n, k) in [(100, 3), (300, 11), (300, 30)] {
        let (d, y) = planted(n, 10_000, k, 7);
        g.bench_with_input(BenchmarkId::new(format!("n{n}_N10000"), k), &k, |b, _| {
            b.iter(|| decompose(&d, black_box(&y), &cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_lasso_at(c: &mut Criterion) {
    let cfg = LassoConfig::default();
    let (d, y) = planted(300, 10_000, 20, 3);
    let unit = y.normalized().unwrap().values;
    let lambda_max = (0..d.len())
        .map(|j| dot(d.column(j), &unit).abs())
        .fold(0.0, f64::max);
    let mut g = c.benchmark_group("lasso_at");
    g.sample_size(10);
    for rel in [0.5, 0.1, 0.02] {
        g.bench_with_input(BenchmarkId::from_parameter(rel), &rel, |b, &rel| {
            b.iter(|| lasso_at(&d, black_box(&unit), rel * lambda_max, None, &cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    for k in [5, 20, 60] {
        let (s, x) = simplex_fixture(300, k, 11);
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| s.project(black_box(&x)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_decompose, bench_lasso_at, bench_projection);
criterion_main!(benches);
