//! Sequential against rayon-parallel execution on the data-parallel hot spots:
//! independent NUTS chains, leave-one-line-in refits, and k-means restarts.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scorefill::analysis::informativeness;
use scorefill::fit::{fit, FitConfig};
use scorefill::model::{ModelSpec, Variant};
use scorefill::profiles::kmeans_restarts;
use scorefill::sampler::SamplerConfig;
use scorefill::synth::generate;
use scorefill::tensor::split_mask;
use scorefill::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn chains(c: &mut Criterion) {
    let spec = ModelSpec::new(Variant::Pmf, 3);
    let syn = generate(&spec, 15, 20, 1, 0.1, 1, None).unwrap();
    let split = split_mask(&syn.tensor, 0.2, 1).unwrap();
    let cfg = FitConfig::new(
        spec,
        SamplerConfig {
            n_tune: 100,
            n_draws: 50,
            n_chains: 4,
            ..SamplerConfig::default()
        },
    );
    let mut group = c.benchmark_group("nuts_chains");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(fit(&syn.tensor, &split.train, &cfg, None, exec).unwrap()))
        });
    }
    group.finish();
}

fn refits(c: &mut Criterion) {
    let spec = ModelSpec::new(Variant::Pmf, 2);
    let syn = generate(&spec, 6, 8, 1, 0.1, 2, None).unwrap();
    let split = split_mask(&syn.tensor, 0.4, 2).unwrap();
    let cfg = FitConfig::new(
        spec,
        SamplerConfig {
            n_tune: 50,
            n_draws: 20,
            ..SamplerConfig::default()
        },
    );
    let mut group = c.benchmark_group("informativeness");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(informativeness(&syn.tensor, &split.train, &cfg, None, exec).unwrap()))
        });
    }
    group.finish();
}

fn restarts(c: &mut Criterion) {
    let points: Vec<Vec<f64>> = (0..400)
        .map(|i| {
            let x = i as f64;
            vec![
                (x * 0.37).sin() * 3.0 + (i % 4) as f64 * 5.0,
                (x * 0.11).cos() * 2.0,
                (i % 7) as f64,
            ]
        })
        .collect();
    let mut group = c.benchmark_group("kmeans_restarts");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(kmeans_restarts(&points, 4, 3, 16, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, chains, refits, restarts);
criterion_main!(benches);
