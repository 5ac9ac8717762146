use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sparseva::sysid::{random_stable_system, synthesize, SignalSpec};
use sparseva::{solve_sparseva, InputKind, SparsevaConfig};

fn sparseva_fir(c: &mut Criterion) {
    let sys = random_stable_system(1);
    let mut group = c.benchmark_group("solve_sparseva");
    for n_rows in [450usize, 1000, 5000] {
        let spec = SignalSpec {
            input_kind: InputKind::White,
            n_rows,
            snr_db: 20.0,
            seed: 7,
        };
        let data = synthesize(&sys, &spec, 35).unwrap();
        let config = SparsevaConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n_rows), &data.problem, |b, p| {
            b.iter(|| solve_sparseva(black_box(p), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sparseva_fir);
criterion_main!(benches);
