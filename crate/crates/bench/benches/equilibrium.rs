use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ifedcrowd::harness::{run_sweep, SweepAxis, SweepSpec};
use ifedcrowd::{best_response, compute_equilibrium, MechanismKind, RewardRates, ScenarioConfig};
use ifedcrowd_bench::population;

fn bench_best_response(c: &mut Criterion) {
    let (profiles, _, _) = population(1, 7);
    let rates = RewardRates::new(4.0, 20.0).unwrap();
    c.bench_function("best_response", |b| {
        b.iter(|| best_response(black_box(&profiles[0]), black_box(&rates)))
    });
}

fn bench_equilibrium(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_equilibrium");
    for n in [10, 30, 100] {
        let (profiles, params, rate_box) = population(n, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| compute_equilibrium(black_box(&profiles), &params, &rate_box).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let spec = SweepSpec::new(SweepAxis::Gamma, ScenarioConfig::default())
        .with_mechanisms(MechanismKind::ALL.to_vec());
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("gamma_all_mechanisms", |b| {
        b.iter(|| run_sweep(black_box(&spec)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_best_response, bench_equilibrium, bench_sweep);
criterion_main!(benches);
