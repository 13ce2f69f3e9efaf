use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lla_bench::{fill_apma, fill_learned, fill_pma, Workload};
use lla_core::harness::SynthKind;
use lla_core::BlackBoxKind;

fn inserts(c: &mut Criterion) {
    for kind in [SynthKind::Random, SynthKind::Sequential, SynthKind::Hammer] {
        let mut group = c.benchmark_group(format!("insert/{}", kind.name()));
        group.sample_size(10);
        for n in [1usize << 12, 1 << 14] {
            let w = Workload::new(kind, n, 64);
            group.throughput(Throughput::Elements(n as u64));
            group.bench_with_input(BenchmarkId::new("pma", n), &w, |b, w| {
                b.iter(|| fill_pma(w))
            });
            group.bench_with_input(BenchmarkId::new("apma", n), &w, |b, w| {
                b.iter(|| fill_apma(w))
            });
            group.bench_with_input(BenchmarkId::new("learned-pma", n), &w, |b, w| {
                b.iter(|| fill_learned(w, BlackBoxKind::Pma))
            });
            group.bench_with_input(BenchmarkId::new("learned-apma", n), &w, |b, w| {
                b.iter(|| fill_learned(w, BlackBoxKind::Apma))
            });
        }
        group.finish();
    }
}

criterion_group!(benches, inserts);
criterion_main!(benches);
