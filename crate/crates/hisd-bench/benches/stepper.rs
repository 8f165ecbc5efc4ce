use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hisd_bench::{index1_fixture, index2_fixture};
use hisd_core::*;

fn bench_steps(c: &mut Criterion) {
    let tau = 2f64.powi(-6);

    let (model, state) = index1_fixture();
    let cfg = SchemeConfig::semi_implicit(tau, Splitting::explicit_only(3));
    c.bench_function("semi_implicit_step_k1", |b| {
        b.iter(|| step(&model, &cfg, black_box(&state)).unwrap())
    });

    let cfg_h0 = SchemeConfig::semi_implicit(tau, Splitting::hessian_at_origin(&model));
    c.bench_function("semi_implicit_step_k1_hessian0", |b| {
        b.iter(|| step(&model, &cfg_h0, black_box(&state)).unwrap())
    });

    let (model2, state2) = index2_fixture();
    let cfg2 = SchemeConfig::semi_implicit(tau, Splitting::explicit_only(3));
    c.bench_function("semi_implicit_step_k2", |b| {
        b.iter(|| step(&model2, &cfg2, black_box(&state2)).unwrap())
    });

    c.bench_function("explicit_step_k2", |b| {
        b.iter(|| explicit_step(&model2, black_box(&state2), tau, &Tolerances::default()).unwrap())
    });
}

fn bench_kernels(c: &mut Criterion) {
    let a = Matrix::from_rows(&[
        vec![4.1, 0.3, -0.2],
        vec![0.7, 3.6, 0.1],
        vec![-0.4, 0.2, 5.3],
    ])
    .unwrap();
    let rhs = Vector::from([1.0, -2.0, 0.5]);
    c.bench_function("lu_solve_3x3", |b| {
        b.iter(|| a.solve(black_box(&rhs)).unwrap())
    });

    let prior = vec![Vector::basis(5, 0), Vector::basis(5, 2)];
    let v_hat = Vector::from([0.3, -0.8, 0.25, 0.41, -0.62]);
    c.bench_function("gram_schmidt_d5", |b| {
        b.iter(|| gram_schmidt(black_box(&v_hat), &prior, 1e-8).unwrap())
    });
}

fn bench_trajectory(c: &mut Criterion) {
    let (model, state) = index1_fixture();
    let cfg = SchemeConfig::semi_implicit(2f64.powi(-6), Splitting::explicit_only(3));
    c.bench_function("trajectory_T1_tau_2e-6", |b| {
        b.iter(|| run_trajectory(&model, &cfg, black_box(&state), 1.0).unwrap())
    });
}

criterion_group!(benches, bench_steps, bench_kernels, bench_trajectory);
criterion_main!(benches);
