use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use l2dyn::integrate::propagate;
use l2dyn::models::vector_field;
use l2dyn::normalform::twist_for_model;
use l2dyn::ModelId;
use l2dyn_bench::{circular_model, interior_state, MU_5};

fn field(c: &mut Criterion) {
    let model = circular_model();
    let s = interior_state();
    c.bench_function("vector_field", |b| b.iter(|| vector_field(black_box(&model), black_box(&s), 0.0).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let model = circular_model();
    let s = interior_state();
    let mut g = c.benchmark_group("propagate");
    for tol in [1e-10, 1e-12] {
        g.bench_function(format!("t10_tol{tol:e}"), |b| b.iter(|| propagate(&model, black_box(&s), 0.0, 10.0, tol).unwrap()));
    }
    g.finish();
}

fn twist(c: &mut Criterion) {
    let mut g = c.benchmark_group("twist");
    g.bench_function("circular", |b| b.iter(|| twist_for_model(black_box(&ModelId::circular(MU_5).unwrap())).unwrap()));
    g.bench_function("hill", |b| b.iter(|| twist_for_model(black_box(&ModelId::Hill)).unwrap()));
    g.finish();
}

criterion_group!(benches, field, propagation, twist);
criterion_main!(benches);
