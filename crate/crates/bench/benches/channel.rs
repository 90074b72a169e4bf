use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ddsound::channel::apply_paths;
use ddsound::waveform::sounding_frame;
use ddsound_bench::{diffuse_channel, frame, sparse_channel};

fn channel(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_paths");
    group.sample_size(10);
    let cfg = frame(1024, 512);
    let tx = sounding_frame(&cfg).expect("frame");
    for (name, paths) in [("sparse_3", sparse_channel(&cfg)), ("rayleigh_192", diffuse_channel(&cfg))] {
        group.throughput(Throughput::Elements((tx.len() * paths.len()) as u64));
        group.bench_with_input(BenchmarkId::new("1024x512", name), &paths, |b, p| {
            b.iter(|| apply_paths(black_box(&tx), p).expect("channel"))
        });
    }
    group.finish();
}

criterion_group!(benches, channel);
criterion_main!(benches);
