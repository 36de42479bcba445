use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use pcb_bench::fixture;
use pcb_core::attribution::{integrated_gradients, AttributionInput, IgConfig};
use pcb_core::experiment::{train, TrainOptions};
use pcb_core::{Graph, Tensor};

fn matmul(c: &mut Criterion) {
    let a = Tensor::filled(&[256, 1024], 0.5);
    let b = Tensor::filled(&[1024, 512], 0.25);
    c.bench_function("matmul 256x1024x512 forward+backward", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (x, y) = (g.variable(a.clone()), g.variable(b.clone()));
            let z = g.matmul(x, y).unwrap();
            let s = g.sum(z);
            g.backward(s).unwrap();
        })
    });
}

fn rating_step(c: &mut Criterion) {
    let (cfg, data, model) = fixture(2, 1400);
    let mut opts = TrainOptions::for_model(&cfg, &model, 1);
    opts.epochs = 1;
    opts.validation_points = 0;
    let mut group = c.benchmark_group("training");
    group.sample_size(20);
    group.bench_function("appraisals->pcb full-batch step (1120 records)", |bench| {
        bench.iter_batched(|| model.clone(), |mut m| train(&mut m, &data, &opts).unwrap(), BatchSize::LargeInput)
    });
    group.finish();
}

fn attribution(c: &mut Criterion) {
    let (_, data, model) = fixture(1, 200);
    let input = AttributionInput::from_record(&data.records[0], &data.vocab, &model);
    let mut group = c.benchmark_group("attribution");
    group.sample_size(20);
    group.bench_function("integrated gradients, 128 steps", |bench| {
        bench.iter(|| integrated_gradients(&model, &input, 0, &IgConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, matmul, rating_step, attribution);
criterion_main!(benches);
