use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use natcon::chart::{christoffel, ConformalProduct, FdConfig};
use natcon::classifier::{classify, DEFAULT_CLASS_TOL};
use natcon::connections::{canonical_torsion, f_ansatz_basis, solve_natural_ansatz};
use natcon::structure_gen::make_constrained_f;
use natcon::{decompose, ClassSpec, Dim};
use natcon_bench::geometry;

const HALF_DIMS: [usize; 3] = [1, 2, 3];

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for n in HALF_DIMS {
        let (g, p, f) = geometry(n, 1);
        let t = canonical_torsion(&f, &p).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(2 * n), &t, |b, t| {
            b.iter(|| decompose(black_box(t), &g, &p).unwrap())
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let mut group = c.benchmark_group("classify");
    for n in HALF_DIMS {
        let (g, p, f) = geometry(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(2 * n), &f, |b, f| {
            b.iter(|| classify(black_box(f), &g, &p, DEFAULT_CLASS_TOL))
        });
    }
    group.finish();
}

fn bench_make_constrained_f(c: &mut Criterion) {
    let mut group = c.benchmark_group("make_constrained_f");
    group.sample_size(20);
    for n in HALF_DIMS {
        let (g, p, _) = geometry(n, 3);
        group.bench_function(BenchmarkId::from_parameter(2 * n), |b| {
            b.iter(|| make_constrained_f(&g, &p, ClassSpec::W1PlusW2, black_box(5)).unwrap())
        });
    }
    group.finish();
}

fn bench_solve_natural_ansatz(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_natural_ansatz");
    group.sample_size(20);
    for n in HALF_DIMS {
        let (g, p, f) = geometry(n, 4);
        let basis = f_ansatz_basis(&f, &p);
        group.bench_function(BenchmarkId::from_parameter(2 * n), |b| {
            b.iter(|| solve_natural_ansatz(black_box(&basis), &f, &g, &p))
        });
    }
    group.finish();
}

fn bench_christoffel(c: &mut Criterion) {
    let mut group = c.benchmark_group("christoffel_fd");
    for n in HALF_DIMS {
        let chart = ConformalProduct::standard(Dim::new(n).unwrap());
        let point = vec![0.1; 2 * n];
        let cfg = FdConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(2 * n), &point, |b, u| {
            b.iter(|| christoffel(&chart, black_box(u), cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_decompose,
    bench_classify,
    bench_make_constrained_f,
    bench_solve_natural_ansatz,
    bench_christoffel
);
criterion_main!(kernels);
