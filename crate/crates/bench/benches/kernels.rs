use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kahler_core::geodesic_envelope::{solve_envelope, EnvelopeProblem};
use kahler_core::local_model::reduced_hessian;
use kahler_core::obstruction::{check_obstruction, check_obstruction_sampled, CMat, ObstructionInstance};
use kahler_core::sharp_family::{check_family_grid, sample_family, SharpFamilyParams};
use kahler_core::strip_harmonic::{ijk_functionals, poisson_kernel};
use kahler_core::{Grid, GridSlice, KahlerCoefficient, QuadratureSpec};
use num_complex::Complex64;

fn strip(c: &mut Criterion) {
    c.bench_function("poisson_kernel", |b| {
        b.iter(|| poisson_kernel(black_box(0.7), black_box(0.3)))
    });
    let quad = QuadratureSpec::default();
    c.bench_function("ijk_functionals_lambda20", |b| {
        b.iter(|| ijk_functionals(black_box(20.0), &quad))
    });
}

fn obstruction(c: &mut Criterion) {
    let z = |re, im| Complex64::new(re, im);
    let inst = ObstructionInstance::new(
        mat2([z(1.5, 0.0), z(0.2, 0.1), z(0.2, -0.1), z(1.0, 0.0)]),
        mat2([z(-0.3, 0.0), z(0.0, 0.2), z(0.0, -0.2), z(0.4, 0.0)]),
        mat2([z(0.8, 0.3), z(0.5, 0.0), z(0.5, 0.0), z(-1.1, 0.4)]),
    )
    .unwrap();
    c.bench_function("check_obstruction_m2", |b| {
        b.iter(|| check_obstruction(black_box(&inst)))
    });
    c.bench_function("check_obstruction_sampled_m2_1e4", |b| {
        b.iter(|| check_obstruction_sampled(black_box(&inst), 10_000, 1))
    });
}

fn mat2(a: [Complex64; 4]) -> CMat {
    CMat::from_row_slice(2, 2, &a)
}

fn grids(c: &mut Criterion) {
    let params = SharpFamilyParams::new(1.0).unwrap();
    let w = KahlerCoefficient::new(1.0).unwrap();
    let u = sample_family(params, 64).unwrap();
    c.bench_function("reduced_hessian_patch64", |b| {
        b.iter(|| reduced_hessian(black_box(&u), w))
    });
    c.bench_function("check_family_grid_32", |b| b.iter(|| check_family_grid(params, 32)));
}

fn envelope(c: &mut Criterion) {
    let w = KahlerCoefficient::new(1.0).unwrap();
    let g = Grid::torus(16).unwrap();
    let v = GridSlice::from_fn(g, |z| {
        0.02 * (std::f64::consts::TAU * z.re).cos() * (std::f64::consts::TAU * z.im).cos()
    })
    .unwrap();
    let problem = EnvelopeProblem::torus(v, w, 17).unwrap();
    let mut group = c.benchmark_group("envelope");
    group.sample_size(10);
    group.bench_function("solve_torus16", |b| b.iter(|| solve_envelope(black_box(&problem))));
    let patch = EnvelopeProblem::patch(sample_family(SharpFamilyParams::new(1.0).unwrap(), 16).unwrap(), w).unwrap();
    group.bench_function("solve_sharp_patch16", |b| b.iter(|| solve_envelope(black_box(&patch))));
    group.finish();
}

criterion_group!(benches, strip, obstruction, grids, envelope);
criterion_main!(benches);
