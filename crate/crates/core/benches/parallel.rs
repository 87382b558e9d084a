use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rankbench::experiment::{generate, Family};
use rankbench::pairwise::LabelRule;
use rankbench::verify::run_trials;
use rankbench::{make_labeled, Environment, Exec, TopKConfig};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn query_rounds(c: &mut Criterion) {
    let instance = generate(&Family::Geometric { rho: 0.9 }, 256, 8, 8, false).unwrap();
    let labeled = make_labeled(instance, 7);
    let labels = labeled.labels();
    let mut group = c.benchmark_group("query_round");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "256x8x2000"), |b| {
            b.iter(|| {
                let mut env = Environment::new(&labeled, u64::MAX).with_exec(exec);
                let mut units: Vec<_> = labels
                    .chunks(8)
                    .cycle()
                    .take(256)
                    .enumerate()
                    .map(|(u, set)| env.unit(set.to_vec(), 2000, &[u as u64]).unwrap())
                    .collect();
                env.run_units(&mut units, None).unwrap();
                env.queries()
            })
        });
    }
    group.finish();
}

fn seed_batch(c: &mut Criterion) {
    let instance = generate(&Family::TwoBlock { hi: 100.0, lo: 1.0 }, 32, 4, 2, false).unwrap();
    let config = TopKConfig::for_n(32).with_kappa(8).with_rule(LabelRule::DESK);
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("seed_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "two-block-32x8"), |b| {
            b.iter(|| run_trials(&instance, &config, &seeds, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, query_rounds, seed_batch);
criterion_main!(benches);
