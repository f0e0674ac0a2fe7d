use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bicomm::detectors::{calibrate, Axis, DetectorKind, Statistic, DEFAULT_BUDGET};
use bicomm::exec::{current_threads, with_threads};
use bicomm::graph_model::sample_null;
use bicomm::lower_bound::tv_exact;
use bicomm::ProblemShape;

/// Sequential baseline and the full pool (at least 4 workers).
fn thread_counts() -> Vec<usize> {
    let all = with_threads(0, current_threads).unwrap();
    vec![1, all.max(4)]
}

fn calibration(c: &mut Criterion) {
    let shape = ProblemShape::new(64, 64, 8, 8).unwrap();
    let stat = Statistic::new(&DetectorKind::truncated(Axis::One, 1.0), 64, 64, 0.25, DEFAULT_BUDGET).unwrap();
    let mut group = c.benchmark_group("calibrate_truncated_2000");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || calibrate(&stat, &shape, 0.25, 0.1, 2000, 7).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn max_scan(c: &mut Criterion) {
    let shape = ProblemShape::new(24, 256, 4, 8).unwrap();
    let stat = Statistic::new(
        &DetectorKind::max_truncated(Axis::One, 0.5, 4),
        24,
        256,
        0.25,
        DEFAULT_BUDGET,
    )
    .unwrap();
    let a = sample_null(&shape, 0.25, 11).unwrap();
    let mut group = c.benchmark_group("max_truncated_24_choose_4");
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || stat.evaluate(&a).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn total_variation(c: &mut Criterion) {
    let shape = ProblemShape::new(4, 4, 2, 2).unwrap();
    let mut group = c.benchmark_group("tv_exact_4x4");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || tv_exact(&shape, 0.25, 0.3).unwrap()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, calibration, max_scan, total_variation);
criterion_main!(benches);
