use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fvgt_bench::{smooth_field, stepper};
use fvgt_core::nonlinear::{BilinearOperator, DealiasScheme};

fn bilinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("bilinear_apply");
    for n in [16, 32] {
        let (grid, u) = smooth_field(n, 1);
        let (_, v) = smooth_field(n, 2);
        let op = BilinearOperator::new(&grid, DealiasScheme::TwoThirds);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| op.apply(black_box(&u), black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn rk4_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    group.sample_size(20);
    for n in [16, 32] {
        let (solver, state) = stepper(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solver.step(black_box(&state)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bilinear, rk4_step);
criterion_main!(benches);
