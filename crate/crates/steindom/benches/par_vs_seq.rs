//! Parallel-vs-sequential comparison for the sweep-heavy entry points.
//! With the default `parallel` feature this pits the default rayon pool
//! against a single-thread pool over the same workload; built with
//! `--no-default-features` both benches run the sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};
use steindom::dominance::{build_table, CMode, FamilyParams};
use steindom::risk::risk_curve;
use steindom::{QuadConfig, ShrinkageSpec};

fn columns() -> Vec<FamilyParams> {
    (1..=7).map(|k| FamilyParams::Phi1 { b: k as f64 / 2.0 }).collect()
}

fn table_workload() {
    let cfg = QuadConfig::default();
    let t = build_table(columns(), vec![3, 4, 5, 6, 7, 8], CMode::Fixed(1.0), &cfg).unwrap();
    assert_eq!(t.cells.len(), 6);
}

fn curve_workload() {
    let cfg = QuadConfig::default();
    let spec = ShrinkageSpec::positive_part(6).unwrap();
    let lambdas: Vec<f64> = (0..24).map(|i| i as f64 * 2.0).collect();
    let c = risk_curve(&spec, &lambdas, &cfg).unwrap();
    assert_eq!(c.values.len(), 24);
}

#[cfg(feature = "parallel")]
fn in_single_thread<F: FnOnce() + Send>(f: F) {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f);
}

#[cfg(not(feature = "parallel"))]
fn in_single_thread<F: FnOnce()>(f: F) {
    f();
}

fn bench_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("dominance_table");
    g.sample_size(10);
    g.bench_function("default_pool", |b| b.iter(table_workload));
    g.bench_function("single_thread", |b| b.iter(|| in_single_thread(table_workload)));
    g.finish();
}

fn bench_curve(c: &mut Criterion) {
    let mut g = c.benchmark_group("risk_curve");
    g.sample_size(10);
    g.bench_function("default_pool", |b| b.iter(curve_workload));
    g.bench_function("single_thread", |b| b.iter(|| in_single_thread(curve_workload)));
    g.finish();
}

criterion_group!(benches, bench_table, bench_curve);
criterion_main!(benches);
