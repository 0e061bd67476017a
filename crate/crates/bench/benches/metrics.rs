use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use priorseg_bench::mask_pair;
use priorseg_core::edt::edt;
use priorseg_core::metrics::{dice, evaluate_pair};

fn bench_edt(c: &mut Criterion) {
    let mut group = c.benchmark_group("edt");
    group.sample_size(10);
    for n in [64, 128] {
        let (gt, _) = mask_pair(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &gt, |b, m| b.iter(|| edt(black_box(m))));
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_pair");
    group.sample_size(10);
    for (n, nz) in [(64, 64), (128, 96), (256, 128)] {
        let pair = mask_pair(n, nz);
        let id = format!("{n}x{n}x{nz}");
        group.bench_with_input(BenchmarkId::from_parameter(&id), &pair, |b, (g, p)| {
            b.iter(|| evaluate_pair(black_box(g), black_box(p)).unwrap())
        });
    }
    group.finish();

    let (g, p) = mask_pair(256, 128);
    c.bench_function("dice 256x256x128", |b| b.iter(|| dice(black_box(&g), black_box(&p)).unwrap()));
}

criterion_group!(benches, bench_edt, bench_evaluate);
criterion_main!(benches);
