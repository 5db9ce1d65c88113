use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orthocp::synth::gaussian_tensor;
use orthocp::{approximate, ApproxConfig, Exec, Extractor};

fn schedules(c: &mut Criterion) {
    let mut group = c.benchmark_group("approximate");
    group.sample_size(20);
    for (shape, rank) in [
        (vec![12usize; 4], 4),
        (vec![20usize; 4], 8),
        (vec![40usize, 40, 40], 10),
    ] {
        let a = gaussian_tensor(&shape, 1).unwrap();
        let label = format!("{}^{} R={rank}", shape[0], shape.len());
        for exec in [Exec::Sequential, Exec::Parallel] {
            let cfg = ApproxConfig::new(rank, shape.len())
                .with_extractor(Extractor::B)
                .with_exec(exec);
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), &label), &cfg, |b, cfg| {
                b.iter(|| approximate(black_box(&a), cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, schedules);
criterion_main!(benches);
