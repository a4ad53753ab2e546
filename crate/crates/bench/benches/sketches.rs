//! Benchmarks: element hashing, sketch adds, merges, estimates, and the
//! closed-form bound computations.

use cardsketch::attack::{simulate_ignore_probabilities, SimulationConfig};
use cardsketch::bounds::{hll_epsilon_avg, variance_lower_bound, Regime};
use cardsketch::{hash_element, theoretical_rse, Algo, Salt, Sketch};
use cardsketch_bench::elements;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use std::hint::black_box;

fn bench_hash(c: &mut Criterion) {
    let salt = Salt::default_public();
    let corpus = elements(1024);
    let mut group = c.benchmark_group("hash_element");
    group.throughput(Throughput::Elements(corpus.len() as u64));
    group.bench_function("sha256_64bit", |b| {
        b.iter(|| {
            for e in &corpus {
                black_box(hash_element(e, &salt).unwrap());
            }
        })
    });
    group.finish();
}

fn bench_add(c: &mut Criterion) {
    let salt = Salt::default_public();
    let corpus = elements(10_000);
    let mut group = c.benchmark_group("add_10k");
    group.throughput(Throughput::Elements(corpus.len() as u64));
    for (name, algo, param) in [
        ("kmv_k4096", Algo::Kmv, 4096u32),
        ("pcsa_k4096", Algo::Pcsa, 4096),
        ("loglog_p12", Algo::LogLog, 12),
        ("hll_p12", Algo::Hll, 12),
    ] {
        group.bench_function(name, |b| {
            b.iter_batched(
                || Sketch::empty(algo, param, &salt).unwrap(),
                |mut sk| {
                    for e in &corpus {
                        sk.add(e, &salt).unwrap();
                    }
                    sk
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn bench_merge_estimate(c: &mut Criterion) {
    let salt = Salt::default_public();
    let corpus = elements(20_000);
    let mut group = c.benchmark_group("merge_and_estimate");
    for (name, algo, param) in [
        ("kmv_k4096", Algo::Kmv, 4096u32),
        ("pcsa_k4096", Algo::Pcsa, 4096),
        ("loglog_p12", Algo::LogLog, 12),
        ("hll_p12", Algo::Hll, 12),
    ] {
        let mut left = Sketch::empty(algo, param, &salt).unwrap();
        let mut right = Sketch::empty(algo, param, &salt).unwrap();
        for e in &corpus[..10_000] {
            left.add(e, &salt).unwrap();
        }
        for e in &corpus[10_000..] {
            right.add(e, &salt).unwrap();
        }
        group.bench_function(format!("merge/{name}"), |b| {
            b.iter_batched(
                || left.clone(),
                |mut acc| {
                    acc.merge_from(&right).unwrap();
                    acc
                },
                BatchSize::SmallInput,
            )
        });
        group.bench_function(format!("estimate/{name}"), |b| {
            b.iter(|| black_box(left.estimate()))
        });
    }
    group.finish();
}

fn bench_bounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("bounds");
    group.bench_function("variance_lower_bound_n1e6", |b| {
        b.iter(|| {
            black_box(
                variance_lower_bound(Regime::Pure, black_box(0.5), None, 100, 1_000_000).unwrap(),
            )
        })
    });
    group.bench_function("hll_epsilon_avg_p15_n1e6", |b| {
        b.iter(|| black_box(hll_epsilon_avg(15, black_box(1_000_000)).unwrap()))
    });
    group.bench_function("theoretical_rse_hll", |b| {
        b.iter(|| black_box(theoretical_rse(Algo::Hll, black_box(6 * 32_768)).unwrap()))
    });
    group.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    let config = SimulationConfig {
        p: 12,
        cardinalities: vec![1000],
        num_targets: 100,
        num_sketches: 100,
        seed: 7,
        threads: 0,
    };
    group.bench_function("ignore_probabilities_small", |b| {
        b.iter(|| black_box(simulate_ignore_probabilities(&config).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_hash,
    bench_add,
    bench_merge_estimate,
    bench_bounds,
    bench_simulation
);
criterion_main!(benches);
