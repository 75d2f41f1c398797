//! Spike-budget sweep on the desk scene, rayon pool against the sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use spikerank::experiment::{desk_dims, sweep_spikes, BudgetMechanism, GridSpec, SceneSource, SpikeSweepConfig};
use spikerank::{Execution, InitMode};
use std::hint::black_box;

fn sweep(c: &mut Criterion) {
    let config = SpikeSweepConfig {
        source: SceneSource::RandomPatch(desk_dims()),
        grid: GridSpec::Uniform { rows: 5, cols: 5 },
        budgets: (0..=6).collect(),
        seeds: (0..4).collect(),
        mechanism: BudgetMechanism::ThresholdScaling,
        mode: InitMode::KnownInit,
        kappa: 1.0,
    };
    let mut group = c.benchmark_group("spike_sweep_5x5");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| sweep_spikes(black_box(&config), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
