use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hypermode::reduction::reduce_linear;
use hypermode::spectral::{dispersion_roots, first_order_modes, Tolerances};
use hypermode::systems::{random_hyperbolic_constant, sample_directions};

fn roots(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("dispersion_roots");
    for n in [1usize, 2, 4] {
        let sos = random_hyperbolic_constant(7, n, 2).unwrap();
        let u = vec![0.0; n];
        let dirs = sample_directions(2, 16);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                for xi in &dirs {
                    black_box(dispersion_roots(&sos, &u, xi, &tol).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn modes(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("first_order_modes");
    for (n, d) in [(1usize, 1usize), (2, 2), (3, 3)] {
        let sos = random_hyperbolic_constant(7, n, d).unwrap();
        let fos = reduce_linear(&sos, &vec![0.0; n]).unwrap();
        let v = vec![0.0; fos.m()];
        let dirs = sample_directions(d, 8);
        group.bench_with_input(BenchmarkId::new("m", fos.m()), &fos, |b, fos| {
            b.iter(|| {
                for xi in &dirs {
                    black_box(first_order_modes(fos, &v, xi, &tol).unwrap());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, roots, modes);
criterion_main!(benches);
