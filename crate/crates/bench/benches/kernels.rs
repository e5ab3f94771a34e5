use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qrv_bench::{doubly_stochastic, hermitian, majorized_pair, seminorm_instance};
use qrv_core::catalog::{joe_verducci, malamud};
use qrv_core::l1::{l1_seminorm, DEFAULT_TOL};
use qrv_core::linalg::hermitian_eigen;
use qrv_core::majorization::{majorizes_b, majorizes_s, majorizes_t, MajorizationOptions};
use qrv_core::measure::birkhoff_decompose;

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigen");
    for d in [2, 4, 8, 16] {
        let a = hermitian(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &a, |b, a| b.iter(|| hermitian_eigen(black_box(a))));
    }
    group.finish();
}

fn transport_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("transport_lp");
    for (m, d) in [(4, 2), (6, 2), (8, 3)] {
        let (f, g, space) = majorized_pair(m, d);
        group.bench_function(format!("feasible m={m} d={d}"), |b| b.iter(|| majorizes_b(&f, &g, &space).unwrap()));
    }
    let (f, g, space) = malamud();
    group.bench_function("malamud (infeasible)", |b| b.iter(|| majorizes_b(&f, &g, &space).unwrap()));
    group.finish();
}

fn seminorm(c: &mut Criterion) {
    let mut group = c.benchmark_group("seminorm_sdp");
    group.sample_size(10);
    for (m, d) in [(2, 2), (4, 2), (4, 4), (6, 4)] {
        let (nu, f) = seminorm_instance(m, d);
        group.bench_function(format!("m={m} d={d}"), |b| b.iter(|| l1_seminorm(&f, &nu, DEFAULT_TOL).unwrap()));
    }
    group.finish();
}

fn majorization(c: &mut Criterion) {
    let mut group = c.benchmark_group("majorization");
    group.sample_size(10);
    let opts = MajorizationOptions {
        state_samples: 1000,
        ..Default::default()
    };
    let (f, g, space) = malamud();
    group.bench_function("order t, malamud", |b| b.iter(|| majorizes_t(&f, &g, &space, &opts).unwrap()));
    let (f, g, space) = joe_verducci();
    group.bench_function("order s, joe-verducci", |b| b.iter(|| majorizes_s(&f, &g, &space, &opts).unwrap()));
    let (f, g, space) = majorized_pair(5, 2);
    group.bench_function("order s, m=5 d=2", |b| b.iter(|| majorizes_s(&f, &g, &space, &opts).unwrap()));
    for m in [5, 8] {
        let bm = doubly_stochastic(m);
        group.bench_function(format!("birkhoff {m}x{m}"), |b| b.iter(|| birkhoff_decompose(black_box(&bm)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, eigen, transport_lp, seminorm, majorization);
criterion_main!(benches);
