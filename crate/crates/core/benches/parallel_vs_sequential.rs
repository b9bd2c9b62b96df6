use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowtel::control::{FeatureTuple, KnnModel};
use flowtel::flow_table::{simulate_collision_rate, simulate_collision_rate_sequential};
use flowtel::traffic::{generate_workload, ClassLabel};
use flowtel::{RegisterConfig, WorkloadSpec};

fn points(n: usize, labeled: bool, seed: u64) -> Vec<FeatureTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = [(); 4].map(|_| rng.random_range(0.0..1000.0));
            let label = labeled.then_some(if i % 2 == 0 { ClassLabel::Benign } else { ClassLabel::DDoS });
            FeatureTuple::new(v, label)
        })
        .collect()
}

fn knn(c: &mut Criterion) {
    let model = KnnModel::fit(&points(2000, true, 1), 3).unwrap();
    let queries = points(2000, false, 2);
    let mut g = c.benchmark_group("knn_predict_batch");
    g.bench_function("parallel", |b| b.iter(|| model.predict_batch(black_box(&queries))));
    g.bench_function("sequential", |b| {
        b.iter(|| model.predict_batch_sequential(black_box(&queries)))
    });
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = RegisterConfig::new(256).unwrap();
    let mut g = c.benchmark_group("collision_monte_carlo");
    g.sample_size(20);
    g.bench_function("parallel", |b| {
        b.iter(|| simulate_collision_rate(cfg, black_box(64), 20_000, 7))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| simulate_collision_rate_sequential(cfg, black_box(64), 20_000, 7))
    });
    g.finish();
}

fn workload(c: &mut Criterion) {
    let spec = WorkloadSpec {
        benign_flows: 1000,
        ddos_flows: 1000,
        ..WorkloadSpec::default()
    };
    let mut g = c.benchmark_group("generate_workload");
    g.sample_size(10);
    g.bench_function("default_features", |b| b.iter(|| generate_workload(black_box(&spec))));
    g.finish();
}

criterion_group!(benches, knn, monte_carlo, workload);
criterion_main!(benches);
