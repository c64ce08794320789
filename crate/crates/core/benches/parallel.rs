//! Sequential vs data-parallel execution of the two hot paths: one DDPG
//! minibatch update and a transfer sweep over the bundled cycles.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emslab::bundled;
use emslab::cycle::DriveCycle;
use emslab::env::RewardParams;
use emslab::harness;
use emslab::par::Exec;
use emslab::rl::{DdpgAgent, DdpgConfig, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn batch(n: usize) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|_| Transition {
            state: [rng.random(), rng.random(), rng.random_range(-0.4..0.4), rng.random()],
            action: rng.random(),
            reward: rng.random_range(-80.0..0.0),
            next_state: [rng.random(), rng.random(), rng.random_range(-0.4..0.4), rng.random()],
            done: false,
        })
        .collect()
}

fn ddpg_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("ddpg_update");
    let b = batch(64);
    let w = vec![1.0; b.len()];
    for (name, exec) in MODES {
        let mut agent = DdpgAgent::new(DdpgConfig::default(), 3).unwrap().with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |bench| bench.iter(|| agent.update(&b, &w).unwrap()));
    }
    g.finish();
}

fn transfer_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer");
    g.sample_size(10);
    let vehicle = bundled::vehicle("prius_prime").unwrap();
    let cycles: Vec<DriveCycle> = bundled::cycle_names().map(|n| bundled::cycle(n).unwrap()).collect();
    let agent = DdpgAgent::new(DdpgConfig::default(), 5).unwrap();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| harness::transfer(&agent, &vehicle, &cycles, RewardParams::default(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ddpg_update, transfer_sweep);
criterion_main!(benches);
