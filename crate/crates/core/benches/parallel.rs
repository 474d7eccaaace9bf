use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use loopzeta::exec::Execution;
use loopzeta::gff::sample_dgff_with;
use loopzeta::lattice_bridge::torus_log_det_prime;
use loopzeta::reweight::PartitionGram;
use loopzeta::subdivision::subdivide;
use loopzeta::surfaces::ModelSurface;
use loopzeta::zeta_det::log_det_batch;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn lattice(c: &mut Criterion) {
    let mut g = c.benchmark_group("torus_log_det_prime_512");
    for (name, mode) in MODES {
        g.bench_function(name, |b| b.iter(|| torus_log_det_prime(black_box(512), 512, mode).unwrap()));
    }
    g.finish();
}

fn gff(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_dgff");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 512), &512, |b, &n| {
            b.iter(|| sample_dgff_with(n, black_box(3), mode).unwrap())
        });
    }
    g.finish();
}

fn gram(c: &mut Criterion) {
    let field = sample_dgff_with(64, 1, Execution::Sequential).unwrap();
    let partition = subdivide(&field, 2.0, 0.05, 6).unwrap();
    let mut g = c.benchmark_group("partition_gram");
    for (name, mode) in MODES {
        g.bench_function(name, |b| b.iter(|| PartitionGram::from_partition(64, black_box(&partition), mode).unwrap()));
    }
    g.finish();
}

fn zeta(c: &mut Criterion) {
    let items: Vec<(ModelSurface, f64)> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&d| (ModelSurface::FlatTorus { a: 1.0, b: 1.5 }, d))
        .collect();
    let mut g = c.benchmark_group("log_det_batch");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(name, |b| b.iter(|| log_det_batch(black_box(&items), mode)));
    }
    g.finish();
}

criterion_group!(benches, lattice, gff, gram, zeta);
criterion_main!(benches);
