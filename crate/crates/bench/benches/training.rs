use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rankforge_bench::{categorical_column, synthetic_matrix, synthetic_table};
use rankforge_core::gbdt::{self, blocked_target_statistics, ordered_target_statistics};
use rankforge_core::{GbdtParams, Preprocessor};

fn preprocess(c: &mut Criterion) {
    let table = synthetic_table(2000, 1);
    c.bench_function("preprocess_fit_transform_2000q", |b| {
        b.iter(|| {
            let p = Preprocessor::fit(black_box(&table)).unwrap();
            p.transform(&table).unwrap()
        })
    });
}

fn target_statistics(c: &mut Criterion) {
    let mut group = c.benchmark_group("target_statistics");
    for n in [12_000, 120_000] {
        let (col, y, perm) = categorical_column(n, 500, 2);
        group.bench_with_input(BenchmarkId::new("ordered", n), &n, |b, _| {
            b.iter(|| ordered_target_statistics(black_box(&col), &y, &perm, 1.0, 1.0 / 6.0).unwrap())
        });
        let blocks: Vec<Vec<usize>> = perm.chunks(6).map(<[usize]>::to_vec).collect();
        group.bench_with_input(BenchmarkId::new("blocked", n), &n, |b, _| {
            b.iter(|| blocked_target_statistics(black_box(&col), &y, &blocks, 1.0, 1.0 / 6.0).unwrap())
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(10);
    let x = synthetic_matrix(1000, 3);
    for depth in [4, 6] {
        let params = GbdtParams {
            n_trees: 50,
            max_depth: depth,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("1000q_50trees_depth", depth), &params, |b, p| {
            b.iter(|| gbdt::fit(black_box(&x), p).unwrap())
        });
    }
    group.finish();

    let model = gbdt::fit(
        &x,
        &GbdtParams {
            n_trees: 200,
            ..Default::default()
        },
    )
    .unwrap();
    c.bench_function("predict_proba_1000q_200trees", |b| {
        b.iter(|| model.predict_proba(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, preprocess, target_statistics, fit);
criterion_main!(benches);
