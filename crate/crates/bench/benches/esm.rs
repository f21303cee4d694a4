use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kubo_bench::{anharmonic_system, harmonic_system};
use kubo_core::{
    apply_polynomial, eigh, kubo_correlator, mixed_derivative, uniform_grid, NuMode,
    PolynomialObservable, Scheme, SourceStencil,
};

fn bench_eigh(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigh");
    for n in [40, 80, 120] {
        let h = anharmonic_system(n).hamiltonian().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| eigh(black_box(h)).unwrap())
        });
    }
    group.finish();
}

fn bench_kubo_correlator(c: &mut Criterion) {
    let times = uniform_grid(10.0, 501);
    let q2 = PolynomialObservable::monomial(2);
    let mut group = c.benchmark_group("kubo_correlator");
    for n in [40, 80] {
        let sys = anharmonic_system(n);
        let spec = sys.spectrum().unwrap();
        let a = apply_polynomial(&q2, &sys.basis).unwrap();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| kubo_correlator(&spec, &sys.thermal, &a, &a, black_box(&times), 1.0).unwrap())
        });
    }
    group.finish();
}

fn bench_mixed_derivative(c: &mut Criterion) {
    let times = uniform_grid(10.0, 501);
    let q = PolynomialObservable::monomial(1);
    let sys = harmonic_system(60);
    let mut group = c.benchmark_group("mixed_derivative");
    group.sample_size(20);
    for (name, scheme, mode) in [
        ("central2_fd", Scheme::Central2, NuMode::Fd),
        ("richardson_fd", Scheme::Central2Richardson, NuMode::Fd),
        (
            "richardson_semianalytic",
            Scheme::Central2Richardson,
            NuMode::SemianalyticMu,
        ),
    ] {
        let stencil = SourceStencil::new(1e-3, 1e-3, scheme, mode).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| mixed_derivative(&sys, &q, &q, &stencil, black_box(&times)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_eigh,
    bench_kubo_correlator,
    bench_mixed_derivative
);
criterion_main!(benches);
