use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use routerlab::simulator::{run_rng, step_batch};
use routerlab::{find_equilibria, hysteresis_boundary, RouterParams, RouterState};

fn batch_step(c: &mut Criterion) {
    let params = RouterParams::new(3.0, 1.0, 1.0, 0.05).unwrap();
    let mut group = c.benchmark_group("step_batch");
    for batch in [64u64, 512, 4096] {
        group.bench_with_input(BenchmarkId::from_parameter(batch), &batch, |b, &batch| {
            let mut rng = run_rng(0, 0);
            let mut state = RouterState::from_difference(0.1);
            b.iter(|| {
                state = step_batch(state, &params, 0.002, batch, 0.0, &mut rng).state;
                black_box(state)
            });
        });
    }
    group.finish();
}

fn equilibria(c: &mut Criterion) {
    let bistable = RouterParams::new(4.0, 1.0, 1.0, 0.3).unwrap();
    let monostable = RouterParams::new(1.5, 1.0, 1.0, 0.3).unwrap();
    c.bench_function("find_equilibria/bistable", |b| {
        b.iter(|| find_equilibria(black_box(&bistable)))
    });
    c.bench_function("find_equilibria/monostable", |b| {
        b.iter(|| find_equilibria(black_box(&monostable)))
    });
    c.bench_function("hysteresis_boundary", |b| {
        b.iter(|| hysteresis_boundary(black_box(4.0), 1.0, 1.0).unwrap())
    });
}

criterion_group!(benches, batch_step, equilibria);
criterion_main!(benches);
