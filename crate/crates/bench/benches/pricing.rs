use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skewlab_core::engine::PathSimulator;
use skewlab_core::smile::{build_smile, default_strikes};
use skewlab_core::{bs_price, implied_vol, BSInputs, GridSpec, ModelSpec};

fn bench_bs(c: &mut Criterion) {
    let mut group = c.benchmark_group("black_scholes");
    let b = BSInputs::new(1.0, 1.05, 0.2, 1.0 / 12.0).unwrap();
    let price = bs_price(&b);
    group.bench_function("price", |bn| bn.iter(|| bs_price(black_box(&b))));
    group.bench_function("implied_vol", |bn| {
        bn.iter(|| implied_vol(black_box(price), 1.0, 1.05, 1.0 / 12.0).unwrap())
    });
    group.finish();
}

fn bench_paths(c: &mut Criterion) {
    let m = ModelSpec::new(1.0, 0.2, 0.6, -0.7, 1.0 / 12.0).unwrap();
    let mut group = c.benchmark_group("paths");
    for steps in [16, 64] {
        let sim = PathSimulator::new(m, GridSpec::new(steps, 1000, 1, true).unwrap()).unwrap();
        let mut i = 0;
        group.bench_function(format!("{steps}_steps"), |bn| {
            bn.iter(|| {
                i += 1;
                sim.path(black_box(i))
            })
        });
    }
    group.finish();
}

fn bench_smile(c: &mut Criterion) {
    let m = ModelSpec::new(1.0, 0.2, 0.6, -0.7, 1.0 / 52.0).unwrap();
    let g = GridSpec::new(32, 2000, 7, true).unwrap();
    let strikes = default_strikes(&m);
    let mut group = c.benchmark_group("smile");
    group.sample_size(10);
    group.bench_function("2000_paths", |bn| {
        bn.iter(|| build_smile(&m, &g, black_box(&strikes)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_bs, bench_paths, bench_smile);
criterion_main!(benches);
