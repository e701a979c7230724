use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use carbontwin_bench::{long_trip, random_windows};
use carbontwin_core::dataset::{make_windows, WindowSpec};
use carbontwin_core::ingest::strict_filter;
use carbontwin_core::nn::{ModelConfig, SequenceNet};

fn bench_lstm(c: &mut Criterion) {
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_units: 32,
        lstm_layers: 1,
        head_units: 32,
        output_dim: 1,
        window_len: 10,
        seed: 1,
    };
    let net = SequenceNet::init(&cfg).unwrap();
    let (windows, targets) = random_windows(64, 10, 3, 2);

    c.bench_function("lstm_forward_batch64_h32", |b| {
        b.iter(|| {
            for w in &windows {
                black_box(net.forward(black_box(w)).unwrap());
            }
        })
    });
    c.bench_function("lstm_backward_batch64_h32", |b| {
        b.iter(|| {
            black_box(
                net.batch_loss_and_grad(black_box(&windows), black_box(&targets))
                    .unwrap(),
            )
        })
    });
}

fn bench_windowing(c: &mut Criterion) {
    let n = 5000;
    let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0, 2.0]).collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let spec = WindowSpec::default();
    c.bench_function("make_windows_5k_rows", |b| {
        b.iter(|| black_box(make_windows(black_box(&inputs), black_box(&targets), &spec).unwrap()))
    });
}

fn bench_strict_filter(c: &mut Criterion) {
    let trip = long_trip(20_000, 7);
    c.bench_function("strict_filter_20k_rows", |b| {
        b.iter_batched(
            || vec![trip.clone()],
            |trips| black_box(strict_filter(trips).unwrap()),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, bench_lstm, bench_windowing, bench_strict_filter);
criterion_main!(benches);
