use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pianoprobe_bench::{random_matrix, random_sequence};
use pianoprobe_core::nnet::{backward, forward, mse_loss, RegressorParams};
use pianoprobe_core::pooling::mean_pool;
use pianoprobe_core::rng::SplitMix64;
use pianoprobe_core::stats::{bootstrap_ci, spearman, BootstrapConfig, BootstrapStatistic};
use pianoprobe_core::NUM_DIMENSIONS;

fn regressor(c: &mut Criterion) {
    let mut group = c.benchmark_group("regressor");
    let mut rng = SplitMix64::new(1);
    for input in [256usize, 1024, 4096] {
        let params = RegressorParams::init(input, 512, NUM_DIMENSIONS, &mut rng);
        let x = random_matrix(&mut rng, 64, input);
        let y = random_matrix(&mut rng, 64, NUM_DIMENSIONS);
        group.bench_with_input(BenchmarkId::new("forward", input), &input, |b, _| {
            b.iter(|| forward(&params, black_box(&x), None).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("forward_backward", input), &input, |b, _| {
            b.iter(|| {
                let (out, cache) = forward(&params, black_box(&x), None).unwrap();
                let (_, grad) = mse_loss(&out, &y).unwrap();
                backward(&params, &cache, &grad, false).unwrap()
            })
        });
    }
    group.finish();
}

fn pooling(c: &mut Criterion) {
    let mut group = c.benchmark_group("mean_pool");
    let mut rng = SplitMix64::new(2);
    for frames in [50usize, 250, 750] {
        let seq = random_sequence(&mut rng, frames, 4096);
        group.bench_with_input(BenchmarkId::from_parameter(frames), &seq, |b, s| {
            b.iter(|| mean_pool(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    let mut rng = SplitMix64::new(3);
    let targets = random_matrix(&mut rng, 300, NUM_DIMENSIONS);
    let preds = random_matrix(&mut rng, 300, NUM_DIMENSIONS);
    let config = BootstrapConfig {
        resamples: 2000,
        ..BootstrapConfig::default()
    };
    for stat in [BootstrapStatistic::MeanPerDimR2, BootstrapStatistic::PooledR2] {
        group.bench_function(format!("{stat:?}"), |b| {
            b.iter(|| bootstrap_ci(&preds, &targets, stat, &config).unwrap())
        });
    }
    group.finish();
}

fn rank_correlation(c: &mut Criterion) {
    let mut group = c.benchmark_group("spearman");
    let mut rng = SplitMix64::new(4);
    for n in [100usize, 1_000, 10_000] {
        // Coarse values so the tie path is exercised.
        let x: Vec<f64> = (0..n).map(|_| rng.below(50) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| spearman(black_box(&x), black_box(&y)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, regressor, pooling, bootstrap, rank_correlation);
criterion_main!(benches);
