//! Seeded trial orchestration.
//!
//! Trial `i` draws all of its randomness from a generator seeded with
//! [`derive_seed`]`(master, i)`. Trials are grouped into fixed-size chunks
//! that are folded in index order, and chunk results are combined by a
//! pairwise merge tree keyed by chunk index. Neither step depends on how many
//! workers ran the chunks, so results are bit-identical across thread counts.
//!
//! With the `parallel` feature disabled, [`run_trials`] runs the same chunk
//! schedule on the calling thread.

use crate::ensemble::{rng_from_seed, EnsembleRng};
use crate::error::{invalid, Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `mix64(master ^ (index * golden_gamma))`.
///
/// Each step is a bijection of `u64`, so distinct indices never collide for a
/// fixed master seed.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Number of consecutive trials folded sequentially before tree merging.
pub const CHUNK_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialPlan {
    pub master_seed: u64,
    pub trials: usize,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl TrialPlan {
    pub fn new(master_seed: u64, trials: usize) -> Self {
        Self { master_seed, trials, workers: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn seed_for(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }
}

/// Streaming per-trial state combined by an associative merge.
pub trait Accumulator<T>: Send {
    fn push(&mut self, index: usize, item: T);
    fn merge(&mut self, other: Self);
}

/// Welford running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = Self::new();
        values.iter().for_each(|&v| s.update(v));
        s
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn combine(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Unbiased sample variance; undefined below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count > 1).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    pub fn stderr(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

impl Accumulator<f64> for RunningStats {
    fn push(&mut self, _index: usize, item: f64) {
        self.update(item);
    }

    fn merge(&mut self, other: Self) {
        self.combine(&other);
    }
}

/// One [`RunningStats`] per tracked scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiStats {
    pub stats: Vec<RunningStats>,
}

impl MultiStats {
    pub fn new(width: usize) -> Self {
        Self { stats: vec![RunningStats::new(); width] }
    }
}

impl Accumulator<Vec<f64>> for MultiStats {
    fn push(&mut self, _index: usize, item: Vec<f64>) {
        assert_eq!(item.len(), self.stats.len(), "statistic width mismatch");
        for (s, v) in self.stats.iter_mut().zip(item) {
            s.update(v);
        }
    }

    fn merge(&mut self, other: Self) {
        for (s, o) in self.stats.iter_mut().zip(&other.stats) {
            s.combine(o);
        }
    }
}

/// Keeps every per-trial value in trial-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleLog<T> {
    pub items: Vec<(usize, T)>,
}

impl<T> Default for SampleLog<T> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<T> SampleLog<T> {
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.items.iter().map(|(_, v)| v)
    }
}

impl<T: Send> Accumulator<T> for SampleLog<T> {
    fn push(&mut self, index: usize, item: T) {
        self.items.push((index, item));
    }

    fn merge(&mut self, mut other: Self) {
        self.items.append(&mut other.items);
    }
}

type ChunkOutcome<A> = (A, Vec<(usize, String)>);

fn run_chunk<T, A, I, F>(plan: &TrialPlan, chunk: usize, init: &I, trial: &F) -> ChunkOutcome<A>
where
    A: Accumulator<T>,
    I: Fn() -> A,
    F: Fn(usize, &mut EnsembleRng) -> Result<T>,
{
    let start = chunk * CHUNK_SIZE;
    let end = (start + CHUNK_SIZE).min(plan.trials);
    let mut acc = init();
    let mut failures = Vec::new();
    for index in start..end {
        let mut rng = rng_from_seed(plan.seed_for(index));
        match trial(index, &mut rng) {
            Ok(v) => acc.push(index, v),
            Err(e) => failures.push((index, e.to_string())),
        }
    }
    (acc, failures)
}

fn tree_merge<T, A: Accumulator<T>>(mut level: Vec<A>) -> Option<A> {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                left.merge(right);
            }
            next.push(left);
        }
        level = next;
    }
    level.pop()
}

fn finish<T, A: Accumulator<T>>(plan: &TrialPlan, outcomes: Vec<ChunkOutcome<A>>) -> Result<A> {
    let mut accs = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (acc, mut f) in outcomes {
        accs.push(acc);
        failures.append(&mut f);
    }
    if !failures.is_empty() {
        return Err(Error::TrialFailures { total: plan.trials, failures });
    }
    Ok(tree_merge(accs).expect("at least one chunk"))
}

fn check_plan(plan: &TrialPlan) -> Result<usize> {
    if plan.trials == 0 {
        return Err(invalid("trial count must be at least 1"));
    }
    if plan.workers == Some(0) {
        return Err(invalid("worker count must be at least 1"));
    }
    Ok(plan.trials.div_ceil(CHUNK_SIZE))
}

/// Runs the chunk schedule on the calling thread.
pub fn run_trials_sequential<T, A, I, F>(plan: &TrialPlan, init: I, trial: F) -> Result<A>
where
    A: Accumulator<T>,
    I: Fn() -> A,
    F: Fn(usize, &mut EnsembleRng) -> Result<T>,
{
    let chunks = check_plan(plan)?;
    let outcomes = (0..chunks).map(|c| run_chunk(plan, c, &init, &trial)).collect();
    finish(plan, outcomes)
}

/// Runs `trial` for every index in `0..plan.trials` and merges the results.
///
/// Any failing trials are reported together in [`Error::TrialFailures`].
#[cfg(feature = "parallel")]
pub fn run_trials<T, A, I, F>(plan: &TrialPlan, init: I, trial: F) -> Result<A>
where
    T: Send,
    A: Accumulator<T>,
    I: Fn() -> A + Sync,
    F: Fn(usize, &mut EnsembleRng) -> Result<T> + Sync,
{
    use rayon::prelude::*;

    let chunks = check_plan(plan)?;
    let work = || -> Vec<ChunkOutcome<A>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(plan, c, &init, &trial))
            .collect()
    };
    let outcomes = match plan.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    finish(plan, outcomes)
}

#[cfg(not(feature = "parallel"))]
pub fn run_trials<T, A, I, F>(plan: &TrialPlan, init: I, trial: F) -> Result<A>
where
    T: Send,
    A: Accumulator<T>,
    I: Fn() -> A + Sync,
    F: Fn(usize, &mut EnsembleRng) -> Result<T> + Sync,
{
    run_trials_sequential(plan, init, trial)
}

/// Maps `f` over `items` on the parallel pool when available, preserving order.
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
