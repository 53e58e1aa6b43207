use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use homext::energy::{mesh_energy_with, EnergyOptions, EnergyParams};
use homext::snowflake::{ChoiceOracle, SnowflakeSpec, SnowflakeState};
use homext::{build_extension_with, MonotoneMap, Parallelism};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("rayon", Parallelism::Rayon),
];

fn extension(c: &mut Criterion) {
    let phi = MonotoneMap::cantor(0.25).unwrap();
    let mut group = c.benchmark_group("build_extension_j12");
    group.sample_size(10);
    for (name, par) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_extension_with(black_box(&phi), 12, par).unwrap())
        });
    }
    group.finish();
}

fn energy(c: &mut Criterion) {
    let phi = MonotoneMap::cantor(0.25).unwrap();
    let mesh = build_extension_with(&phi, 12, Parallelism::Rayon).unwrap();
    let params = EnergyParams::new(1.5, 0.3).unwrap();
    let mut group = c.benchmark_group("mesh_energy_j12");
    group.sample_size(10);
    for (name, par) in MODES {
        let opts = EnergyOptions {
            parallelism: par,
            ..EnergyOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mesh_energy_with(black_box(&mesh), params, &opts).unwrap())
        });
    }
    group.finish();
}

fn snowflake(c: &mut Criterion) {
    let spec = SnowflakeSpec::new(1.0 / 3.0, ChoiceOracle::AllBump).unwrap();
    let mut group = c.benchmark_group("snowflake_gen8");
    group.sample_size(10);
    for (name, par) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| SnowflakeState::build_with(black_box(spec.clone()), 8, par).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, extension, energy, snowflake);
criterion_main!(benches);
