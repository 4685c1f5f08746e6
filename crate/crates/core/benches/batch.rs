use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rankflow::diagnostics::rank_trajectory;
use rankflow::models::{consensus_with_profile, random_state_with_rank, Graph};
use rankflow::{integrate, par, CoupledSystem, IntegratorConfig, StateMatrix, Trajectory};

fn batch(n_systems: usize) -> Vec<(CoupledSystem, StateMatrix)> {
    (0..n_systems)
        .map(|k| {
            let g = Graph::cycle(8).unwrap();
            let phase = k as f64 * 0.1;
            let sys = consensus_with_profile(&g, 3, move |t| 0.1 * (1.5 + (t + phase).sin())).unwrap();
            let x0 = random_state_with_rank(3, 8, 2, k as u64).unwrap();
            (sys, x0)
        })
        .collect()
}

fn run(item: &(CoupledSystem, StateMatrix)) -> Trajectory {
    let cfg = IntegratorConfig::dp54(1e-9, 1e-12, 0.1);
    integrate(&item.0, &item.1, 0.0, 10.0, &cfg).unwrap()
}

fn bench_integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate_batch");
    group.sample_size(10);
    for &size in &[8usize, 32] {
        let items = batch(size);
        group.bench_with_input(BenchmarkId::new("parallel", size), &items, |b, items| {
            b.iter(|| black_box(par::map(items, run)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", size), &items, |b, items| {
            b.iter(|| black_box(par::map_sequential(items, run)))
        });
    }
    group.finish();
}

fn bench_rank_trajectory(c: &mut Criterion) {
    let items = batch(4);
    let trajs: Vec<Trajectory> = items.iter().map(run).collect();
    let mut group = c.benchmark_group("rank_trajectory");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&trajs, |t| rank_trajectory(t, 1e-8).unwrap())))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_sequential(&trajs, |t| rank_trajectory(t, 1e-8).unwrap())))
    });
    group.finish();
}

criterion_group!(benches, bench_integration, bench_rank_trajectory);
criterion_main!(benches);
