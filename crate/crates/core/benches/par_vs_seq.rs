//! Rayon vs sequential throughput on the two data-parallel hot paths:
//! trajectory-ensemble stationary sampling and the coupling scan (moment
//! table build plus per-coupling solves).
//!
//! Run with `cargo bench -p snlse-core`. The sequential twins are the same
//! code paths the crate falls back to when built with
//! `--no-default-features`.

use criterion::{criterion_group, criterion_main, Criterion};
use snlse_core::dynamics::{BoundaryPolicy, ModelParams};
use snlse_core::estat::{estimate_stationary, estimate_stationary_seq, SamplingPlan};
use snlse_core::lattice::{CapProfile, LatticeOptions, ModeLattice};
use snlse_core::meanfield::{transition_scan, transition_scan_seq, MeanFieldConfig};
use std::f64::consts::PI;

fn three_mode() -> (ModeLattice, ModelParams) {
    let cap = CapProfile::PerMode {
        entries: vec![(0.0, 1.0), (2.0 * PI, 0.5)],
    };
    let lattice = ModeLattice::build(1, 1.5, 1.0, &cap, &LatticeOptions::default()).unwrap();
    let params =
        ModelParams::uniform(-5.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lattice).unwrap();
    (lattice, params)
}

fn bench_ensemble(c: &mut Criterion) {
    let (lattice, params) = three_mode();
    let plan = SamplingPlan::new(2_000_000, 10, 8);
    let mut group = c.benchmark_group("stationary_ensemble");
    group.sample_size(10);
    group.bench_function("rayon", |b| {
        b.iter(|| estimate_stationary(&params, &lattice, 1e-4, 7, &plan).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| estimate_stationary_seq(&params, &lattice, 1e-4, 7, &plan).unwrap())
    });
    group.finish();
}

fn bench_scan(c: &mut Criterion) {
    let cap = CapProfile::Linear {
        alpha0: 1.0,
        k_max: 1.0,
    };
    let mut cfg = MeanFieldConfig::new(3, 0.5, 0.0, 1e3, cap, BoundaryPolicy::Reflect)
        .validated()
        .unwrap();
    cfg.scan_points = 600;
    let grid: Vec<f64> = (0..=12).map(|i| 0.55 + 0.3 * i as f64 / 12.0).collect();
    let mut group = c.benchmark_group("coupling_scan");
    group.sample_size(10);
    group.bench_function("rayon", |b| b.iter(|| transition_scan(&cfg, &grid).unwrap()));
    group.bench_function("sequential", |b| {
        b.iter(|| transition_scan_seq(&cfg, &grid).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_ensemble, bench_scan);
criterion_main!(benches);
