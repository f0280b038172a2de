use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcframe::operator::hs_distance_from_samples;
use mcframe::*;

fn circle_kernel() -> Kernel {
    Kernel::circle(FourierProfile::Exponential { rate: 1.0 }, 256).unwrap()
}

fn eigen(c: &mut Criterion) {
    let k = circle_kernel();
    let mut group = c.benchmark_group("eigendecompose");
    for n in [64usize, 256, 1024] {
        let s = draw_samples(&Domain::Circle, n, 1).unwrap();
        let m = kernel_matrix(&k, &s).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| eigendecompose(black_box(m), k.kappa_bound()).unwrap())
        });
    }
    group.finish();
}

fn wavelets(c: &mut Criterion) {
    let k = circle_kernel();
    let s = draw_samples(&Domain::Circle, 512, 2).unwrap();
    let fam = FilterFamily::landweber(k.kappa_bound()).unwrap();
    let frame = WaveletFrame::new(&k, &s, fam, 64).unwrap();
    let x = Point::Circle(0.3);
    c.bench_function("wavelets_at/512", |b| {
        b.iter(|| frame.wavelets_at(black_box(16), &x).unwrap())
    });
    let f: Vec<f64> = frame.eigen().sample_vector(0);
    c.bench_function("analyze/512x64", |b| b.iter(|| frame.analyze(black_box(&f), 64).unwrap()));
}

fn distances(c: &mut Criterion) {
    let k = circle_kernel();
    let r = reference_operator(&k, &Domain::Circle).unwrap();
    let mut group = c.benchmark_group("hs_distance");
    for n in [256usize, 2048] {
        let s = draw_samples(&Domain::Circle, n, 3).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| hs_distance_from_samples(&r, black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn filters(c: &mut Criterion) {
    let lambdas: Vec<f64> = (1..=1024).map(|i| i as f64 / 1024.0).collect();
    for fam in [
        FilterFamily::tikhonov(1.0).unwrap(),
        FilterFamily::landweber(1.0).unwrap(),
        FilterFamily::asymptotic(1.0).unwrap(),
    ] {
        c.bench_function(&format!("g_squared/{}", fam.descriptor()), |b| {
            b.iter(|| {
                lambdas
                    .iter()
                    .map(|&l| fam.g_squared(black_box(37), l).unwrap())
                    .sum::<f64>()
            })
        });
    }
}

criterion_group!(benches, eigen, wavelets, distances, filters);
criterion_main!(benches);
