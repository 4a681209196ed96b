use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use stabcast_core::sim::scenario::{FaultSpec, Scenario};
use stabcast_core::sweep;

fn scenario() -> Scenario {
    let mut sc = Scenario { n: 5, loss: 0.1, duplication: 0.05, reorder: 0.1, ..Scenario::default() };
    sc.workload.broadcasts = 100;
    sc.workload.interval = 20;
    sc.fault = Some(FaultSpec::default());
    sc
}

fn bench_sweep(c: &mut Criterion) {
    let sc = scenario();
    let mut g = c.benchmark_group("sweep-8-seeds");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("sequential", 8), |b| b.iter(|| sweep::sweep_sequential(&sc, 1..=8)));
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", 8), |b| b.iter(|| sweep::sweep_parallel(&sc, 1..=8)));
    g.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
