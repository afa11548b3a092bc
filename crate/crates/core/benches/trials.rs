use bandwigner::ensemble::{sample_bwe_with, EntryDistribution};
use bandwigner::montecarlo::{run_trials, run_trials_sequential, MultiStats, TrialPlan};
use bandwigner::spectral::{eigh, trace_powers};
use bandwigner::eigenstats::YqAccumulator;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn trace_moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("trace_moments_n200");
    group.sample_size(10);
    for b in [10usize, 80] {
        let plan = TrialPlan::new(7, 64);
        let trial = move |_: usize, rng: &mut _| {
            let h = sample_bwe_with(200, b, EntryDistribution::Gaussian, rng)?;
            trace_powers(&h, &[2, 4])
        };
        group.bench_with_input(BenchmarkId::new("parallel", b), &b, |bench, _| {
            bench.iter(|| run_trials(&plan, || MultiStats::new(2), trial).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", b), &b, |bench, _| {
            bench.iter(|| run_trials_sequential(&plan, || MultiStats::new(2), trial).unwrap())
        });
    }
    group.finish();
}

fn yq_eigenvectors(c: &mut Criterion) {
    let mut group = c.benchmark_group("yq_n100");
    group.sample_size(10);
    let n = 100;
    let plan = TrialPlan::new(11, 64);
    let trial = |_: usize, rng: &mut _| {
        let h = sample_bwe_with(n, 40, EntryDistribution::Gaussian, rng)?;
        eigh(&h.to_dense())
    };
    group.bench_function("parallel", |bench| {
        bench.iter(|| run_trials(&plan, || YqAccumulator::for_trials(n, 64), trial).unwrap())
    });
    group.bench_function("sequential", |bench| {
        bench.iter(|| {
            run_trials_sequential(&plan, || YqAccumulator::for_trials(n, 64), trial).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, trace_moments, yq_eigenvectors);
criterion_main!(benches);
