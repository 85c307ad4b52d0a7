use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use vrm_bench::fixture;
use vrm_core::engine::{run_with, Arithmetic, EngineOptions};
use vrm_core::harness::gen::Family;
use vrm_core::oracles::{greedy_baseline, opt_hungarian, vrm_with_mv_servers};
use vrm_core::Gamma;

fn quiet(arithmetic: Arithmetic) -> EngineOptions {
    EngineOptions { audit: false, snapshots: false, arithmetic, ..Default::default() }
}

fn engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for family in [Family::Uniform, Family::EscalatingLine] {
        for m in [64, 256] {
            let inst = fixture(family, m);
            group.bench_with_input(BenchmarkId::new(family.name(), m), &inst, |b, inst| {
                b.iter(|| run_with(black_box(inst), quiet(Arithmetic::Auto), &mut ()).unwrap())
            });
        }
    }
    let inst = fixture(Family::Uniform, 64);
    group.bench_function("uniform_rational/64", |b| {
        b.iter(|| run_with(black_box(&inst), quiet(Arithmetic::Exact), &mut ()).unwrap())
    });
    group.bench_function("uniform_audited/64", |b| {
        b.iter(|| run_with(black_box(&inst), EngineOptions::default(), &mut ()).unwrap())
    });
    group.finish();
}

fn oracles(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracles");
    group.sample_size(10);
    let inst = fixture(Family::Uniform, 256);
    group.bench_function("hungarian/256", |b| b.iter(|| opt_hungarian(black_box(&inst))));
    group.bench_function("greedy/256", |b| b.iter(|| greedy_baseline(black_box(&inst))));
    let small = fixture(Family::Clustered, 16);
    group.bench_function("virtual_servers/16", |b| {
        b.iter(|| vrm_with_mv_servers(black_box(&small), &Gamma::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, engine, oracles);
criterion_main!(benches);
