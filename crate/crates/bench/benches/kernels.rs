use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hlop_bench::{pixel_batch, uniform};
use hlop_core::numeric::{matmul, matmul_nt};
use hlop_core::trainers::ottt::ottt_batch;
use hlop_core::{ErrorPropConfig, HebbianConfig, LateralMode, LateralSubspace, Network, NeuronConfig, Rng, Target};

fn products(c: &mut Criterion) {
    let mut rng = Rng::new(1);
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 200, 784] {
        let a = uniform(64, n, -1.0, 1.0, &mut rng);
        let b = uniform(n, 200, -1.0, 1.0, &mut rng);
        let bt = b.transpose();
        group.bench_with_input(BenchmarkId::new("nn", n), &n, |bench, _| bench.iter(|| matmul(&a, &b).unwrap()));
        group.bench_with_input(BenchmarkId::new("nt", n), &n, |bench, _| bench.iter(|| matmul_nt(&a, &bt).unwrap()));
    }
    group.finish();
}

fn hebbian(c: &mut Criterion) {
    let mut rng = Rng::new(2);
    let x = pixel_batch(64, &mut rng);
    let mut sub = LateralSubspace::new(784, HebbianConfig::default(), LateralMode::Linear);
    sub.set_consolidated(uniform(150, 784, -0.03, 0.03, &mut rng)).unwrap();
    sub.set_fresh(uniform(70, 784, -0.03, 0.03, &mut rng)).unwrap();
    c.bench_function("hebbian_update/784x70_batch64", |bench| {
        bench.iter_batched_ref(|| sub.clone(), |s| s.hebbian_update(&x).unwrap(), criterion::BatchSize::SmallInput)
    });
    c.bench_function("project_rows/784x150_batch64", |bench| bench.iter(|| sub.project_rows(&x).unwrap()));
}

fn ottt(c: &mut Criterion) {
    let mut rng = Rng::new(3);
    let net = Network::mlp(784, &[200, 200], 10, &mut rng).unwrap();
    let x = pixel_batch(64, &mut rng);
    let labels: Vec<usize> = (0..64).map(|i| i % 10).collect();
    let target = Target::new(&labels);
    let cfg = NeuronConfig { time_steps: 6, ..NeuronConfig::default() };
    let ep = ErrorPropConfig::bp();
    c.bench_function("ottt_batch/784-200-200-10_T6_batch64", |bench| {
        bench.iter(|| ottt_batch(&net, &x, &target, &cfg, &ep).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = products, hebbian, ottt
}
criterion_main!(kernels);
