use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use soilsamp::evaluation::{nb_fit, nb_predict, DEFAULT_VAR_SMOOTHING};
use soilsamp::samplers::{sample, ClhsOptions, Method, RngSeed};
use soilsamp::terrain::{derive_layers, features_from_dem};
use soilsamp_bench::default_site;

fn terrain(c: &mut Criterion) {
    let (dem, _, _) = default_site();
    c.bench_function("derive_layers/100x130", |b| b.iter(|| derive_layers(black_box(&dem)).unwrap()));
    c.bench_function("features_from_dem/100x130", |b| b.iter(|| features_from_dem(black_box(&dem)).unwrap()));
}

fn samplers(c: &mut Criterion) {
    let (_, _, fm) = default_site();
    let clhs = ClhsOptions::with_iterations(2_000);
    let mut group = c.benchmark_group("samplers_k27");
    group.sample_size(10);
    for method in Method::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(method), &method, |b, &m| {
            b.iter(|| sample(black_box(&fm), m, 27, 0.1, RngSeed(7), &clhs).unwrap())
        });
    }
    group.finish();
}

fn naive_bayes(c: &mut Criterion) {
    let (_, classes, fm) = default_site();
    let labels = classes.labels_for(&fm).unwrap();
    let x = fm.predictors(false);
    let rows: Vec<usize> = (0..fm.nrows()).step_by(fm.nrows() / 27).collect();
    let train = x.select_rows(&rows);
    let train_labels: Vec<_> = rows.iter().map(|&i| labels[i]).collect();
    let model = nb_fit(&train, &train_labels, DEFAULT_VAR_SMOOTHING).unwrap();
    c.bench_function("nb_predict/full_grid", |b| b.iter(|| nb_predict(&model, black_box(&x)).unwrap()));
}

criterion_group!(benches, terrain, samplers, naive_bayes);
criterion_main!(benches);
