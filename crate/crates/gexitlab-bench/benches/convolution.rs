use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gexitlab::{ChannelFamily, ChannelKind, Grid};

fn convolutions(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolution");
    for bins in [1025, 4097] {
        let fam = ChannelFamily::new(ChannelKind::Bawgn, Grid::new(30.0, bins).unwrap());
        let a = fam.density(0.4).unwrap();
        let b = fam.density(0.6).unwrap();
        group.bench_with_input(BenchmarkId::new("variable", bins), &bins, |bch, _| {
            bch.iter(|| black_box(&a).var_convolve(black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("check", bins), &bins, |bch, _| {
            bch.iter(|| black_box(&a).check_convolve(black_box(&b)))
        });
    }
    group.finish();
}

criterion_group!(benches, convolutions);
criterion_main!(benches);
