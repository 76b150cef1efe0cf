//! Throughput comparison between the rayon-backed primitives and their
//! sequential references, plus the hot solver loops.
//!
//! Build with and without the `parallel` feature to compare paths:
//! `cargo bench -p dpkmedian` vs
//! `cargo bench -p dpkmedian --no-default-features`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpkmedian::geometry::{self, CenterSet, Dataset, Point};
use dpkmedian::kmedian;
use dpkmedian::rng::SeededRng;

fn random_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let points: Vec<Point> = (0..n)
        .map(|_| Point::new((0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap())
        .collect();
    Dataset::unweighted(points).unwrap()
}

fn random_centers(k: usize, dim: usize, seed: u64) -> CenterSet {
    let mut rng = SeededRng::new(seed);
    let centers: Vec<Point> = (0..k)
        .map(|_| Point::new((0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap())
        .collect();
    CenterSet::new(centers).unwrap()
}

fn bench_cost(c: &mut Criterion) {
    let mut group = c.benchmark_group("cost");
    for &n in &[2_000usize, 20_000] {
        let data = random_dataset(n, 8, 1);
        let centers = random_centers(16, 8, 2);
        group.bench_with_input(BenchmarkId::new("dispatched", n), &n, |b, _| {
            b.iter(|| geometry::cost(black_box(&data), black_box(&centers)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| geometry::cost_seq(black_box(&data), black_box(&centers)).unwrap())
        });
    }
    group.finish();
}

fn bench_assign(c: &mut Criterion) {
    let mut group = c.benchmark_group("assign");
    for &n in &[2_000usize, 20_000] {
        let data = random_dataset(n, 8, 3);
        let centers = random_centers(16, 8, 4);
        group.bench_with_input(BenchmarkId::new("dispatched", n), &n, |b, _| {
            b.iter(|| geometry::assign(black_box(&data), black_box(&centers)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| geometry::assign_seq(black_box(&data), black_box(&centers)).unwrap())
        });
    }
    group.finish();
}

fn bench_cover_ball(c: &mut Criterion) {
    let mut group = c.benchmark_group("cover_ball");
    for &(d, cover) in &[(2usize, 0.05f64), (3, 0.15)] {
        let center = Point::origin(d);
        group.bench_with_input(
            BenchmarkId::new("lattice", format!("d{d}_r{cover}")),
            &d,
            |b, _| {
                b.iter(|| {
                    geometry::cover_ball(black_box(&center), black_box(1.0), black_box(cover))
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_weiszfeld(c: &mut Criterion) {
    let mut group = c.benchmark_group("geometric_median");
    for &n in &[200usize, 2_000] {
        let data = random_dataset(n, 8, 5);
        group.bench_with_input(BenchmarkId::new("weiszfeld", n), &n, |b, _| {
            b.iter(|| {
                kmedian::geometric_median(
                    black_box(data.points()),
                    black_box(data.weights()),
                    1e-9,
                    500,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_local_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_search");
    group.sample_size(10);
    let data = random_dataset(400, 4, 6);
    let candidates = CenterSet::new(data.points().to_vec()).unwrap();
    group.bench_function("n400_k4", |b| {
        b.iter(|| {
            kmedian::local_search_kmedian(black_box(&data), 4, black_box(&candidates), 50).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_cost,
    bench_assign,
    bench_cover_ball,
    bench_weiszfeld,
    bench_local_search
);
criterion_main!(benches);
