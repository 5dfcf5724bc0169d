use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use mmjoin_bench::{dense_graph, skewed_graph};
use mmjoin_core::joinproject::two_path_join;
use mmjoin_core::{full_join_dedup, multiply_counts, CountMatrix, Planner};

fn two_path(c: &mut Criterion) {
    let mut group = c.benchmark_group("twopath");
    group.sample_size(10);
    for (name, g) in [("dense", dense_graph(20_000, 42)), ("skewed", skewed_graph(20_000, 42))] {
        let plan = Planner::default().plan(&g, &g).expect("plan");
        group.bench_with_input(BenchmarkId::new("mmjoin", name), &g, |b, g| {
            b.iter(|| two_path_join(black_box(g), g, &plan, false).expect("join").len())
        });
        group.bench_with_input(BenchmarkId::new("fulljoin", name), &g, |b, g| {
            b.iter(|| full_join_dedup(black_box(g), g).len())
        });
    }
    group.finish();
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    group.sample_size(10);
    for dim in [64, 128, 256] {
        let a = CountMatrix::random(dim, dim, 3, 1);
        let b = CountMatrix::random(dim, dim, 3, 2);
        group.bench_function(BenchmarkId::from_parameter(dim), |bench| {
            bench.iter(|| multiply_counts(black_box(&a), black_box(&b)).expect("multiply"))
        });
    }
    group.finish();
}

criterion_group!(benches, two_path, matmul);
criterion_main!(benches);
