use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vrcnn_bench::{luma, rd_pair};
use vrcnn_core::dataset::degrade;
use vrcnn_core::metrics::{bd_rate_with, BdMethod};
use vrcnn_core::{bd_psnr, psnr, QualityLevel};

fn bjontegaard(c: &mut Criterion) {
    let (anchor, test) = rd_pair();
    c.bench_function("bd_rate_cubic", |b| {
        b.iter(|| bd_rate_with(black_box(&anchor), &test, BdMethod::Cubic))
    });
    c.bench_function("bd_rate_piecewise", |b| {
        b.iter(|| bd_rate_with(black_box(&anchor), &test, BdMethod::Piecewise))
    });
    c.bench_function("bd_psnr_cubic", |b| {
        b.iter(|| bd_psnr(black_box(&anchor), &test))
    });
}

fn planes(c: &mut Criterion) {
    let original = luma(416, 240, 2);
    let q = QualityLevel::new(37).unwrap();
    let degraded = degrade(&original, q);
    c.bench_function("psnr_416x240", |b| {
        b.iter(|| psnr(black_box(&original), &degraded))
    });
    c.bench_function("degrade_416x240", |b| {
        b.iter(|| degrade(black_box(&original), q))
    });
}

criterion_group!(benches, bjontegaard, planes);
criterion_main!(benches);
