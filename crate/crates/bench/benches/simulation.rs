//! Throughput benchmarks: per-policy simulation cost and the fixed-point
//! solver. The peak-age policies pay for a bisection per packet, so they
//! set the budget for full-size sweeps.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use aoi_sched_core::calibrate::solve_beta;
use aoi_sched_core::distributions::DistributionSpec;
use aoi_sched_core::engine::{simulate, ScenarioConfig};
use aoi_sched_core::policies::PolicySpec;

fn bench_policies(c: &mut Criterion) {
    let dist_t = DistributionSpec::exponential(0.8).unwrap();
    let dist_c = DistributionSpec::exponential(0.2).unwrap();
    let mut group = c.benchmark_group("simulate_20k_packets");
    group.sample_size(20);
    for policy in [
        PolicySpec::ZeroWait,
        PolicySpec::LongWait { beta: 1.3 },
        PolicySpec::PAoIThreshold { lambda: 2.4 },
        PolicySpec::PAoIThresholdPostponed { lambda: 2.4 },
    ] {
        group.bench_function(policy.to_string(), |b| {
            b.iter(|| {
                let config = ScenarioConfig::new(dist_t, dist_c, black_box(policy), 20_000, 1);
                simulate(&config).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_solve_beta(c: &mut Criterion) {
    let dist_t = DistributionSpec::exponential(0.8).unwrap();
    let dist_c = DistributionSpec::exponential(0.2).unwrap();
    let mut group = c.benchmark_group("calibrate");
    group.sample_size(20);
    group.bench_function("solve_beta_100k_samples", |b| {
        b.iter(|| solve_beta(&dist_t, &dist_c, black_box(100_000), 1e-9, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_policies, bench_solve_beta);
criterion_main!(benches);
