use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use indrnn_eeg::exec;
use indrnn_eeg::model::{build_indrnn_model, ModelConfig};
use indrnn_eeg::numerics::{matmul, SeededRng, Tensor};
use indrnn_eeg::training::{evaluate, Sample};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn bench_matmul(c: &mut Criterion) {
    let mut rng = SeededRng::new(0);
    let a = Tensor::<f32>::from_fn(&[736, 128], |_| rng.normal() as f32);
    let b = Tensor::<f32>::from_fn(&[128, 128], |_| rng.normal() as f32);
    let mut g = c.benchmark_group("matmul_736x128x128");
    for (name, on) in modes() {
        exec::set_parallel(on);
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| matmul(&a, &b).unwrap())
        });
    }
    g.finish();
    exec::set_parallel(true);
}

fn bench_forward(c: &mut Criterion) {
    let mut rng = SeededRng::new(1);
    let mut cfg = ModelConfig::with_depth(3);
    cfg.input_channels = 17;
    let mut model = build_indrnn_model::<f32>(&cfg, &mut rng).unwrap();
    // running statistics must exist before eval-mode inference
    for layer in model.layers_mut() {
        if let indrnn_eeg::layers::Layer::BatchNorm(bn) = layer {
            bn.stats_ready = true;
        }
    }
    let steps = 368;
    let samples: Vec<Sample> = (0..32)
        .map(|i| {
            let v = (0..steps * 17).map(|_| rng.normal() as f32).collect();
            Sample::new(v, steps, 17, i % 2).unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("evaluate_3_blocks_32x368x17");
    g.sample_size(10);
    for (name, on) in modes() {
        exec::set_parallel(on);
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| evaluate(&model, &samples, 8).unwrap())
        });
    }
    g.finish();
    exec::set_parallel(true);
}

criterion_group!(benches, bench_matmul, bench_forward);
criterion_main!(benches);
