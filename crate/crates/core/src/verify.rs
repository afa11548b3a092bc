//! Monte-Carlo estimators of the expected traces that the closed forms in
//! [`crate::exact`] predict.

use crate::ensemble::{
    sample_bwe_with, sample_full_block_with, sample_lte_with, EntryDistribution, EnsembleRng,
};
use crate::error::{invalid, Result};
use crate::matrix::DenseMatrix;
use crate::montecarlo::{run_trials, MultiStats, RunningStats, TrialPlan};
use crate::spectral::trace_power;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Estimate {
    fn from_stats(s: &RunningStats) -> Self {
        Self {
            mean: s.mean().unwrap_or(f64::NAN),
            stderr: s.stderr().unwrap_or(f64::NAN),
            count: s.count(),
        }
    }

    /// `|mean - expected| / stderr`, treating an exact zero-variance match as 0.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.mean - expected).abs();
        if diff == 0.0 {
            0.0
        } else if self.stderr > 0.0 {
            diff / self.stderr
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees(&self, expected: f64, max_z: f64) -> bool {
        self.z_score(expected) <= max_z
    }
}

fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Per-draw values of the five block traces, in the order of
/// [`crate::exact::BlockTraces::as_f64`].
pub fn block_traces_draw(b: usize, dist: EntryDistribution, rng: &mut EnsembleRng) -> Result<Vec<f64>> {
    let a = sample_full_block_with(b, dist, rng)?;
    let l1 = sample_lte_with(b, dist, rng)?;
    let l2 = sample_lte_with(b, dist, rng)?;
    let a2 = a.matmul(&a)?;
    let l1t = l1.transpose();
    let l2t = l2.transpose();
    let llt = l1.matmul(&l1t)?;
    let ltl = l1t.matmul(&l1)?;
    let l2l2t = l2.matmul(&l2t)?;
    Ok(vec![
        a2.frobenius_norm_sq(),
        frobenius_inner(&a2, &llt),
        frobenius_inner(&a2, &ltl),
        frobenius_inner(&ltl, &l2l2t),
        llt.frobenius_norm_sq(),
    ])
}

/// Estimates `E tr(A^4)`, `E tr(A^2 L L^T)`, `E tr(A^2 L^T L)`,
/// `E tr(L_1^T L_1 L_2 L_2^T)` and `E tr(L L^T L L^T)` from `plan.trials`
/// independent block draws.
pub fn block_traces_monte_carlo(
    b: usize,
    dist: EntryDistribution,
    plan: &TrialPlan,
) -> Result<[Estimate; 5]> {
    if b == 0 {
        return Err(invalid("block size b must be positive"));
    }
    let stats: MultiStats = run_trials(plan, || MultiStats::new(5), |_, rng| {
        block_traces_draw(b, dist, rng)
    })?;
    let mut out = [Estimate { mean: 0.0, stderr: 0.0, count: 0 }; 5];
    for (o, s) in out.iter_mut().zip(&stats.stats) {
        *o = Estimate::from_stats(s);
    }
    Ok(out)
}

/// Estimates `E tr H^4` for `H ~ BWE(N, b)`.
pub fn tr_h4_monte_carlo(
    n: usize,
    b: usize,
    dist: EntryDistribution,
    plan: &TrialPlan,
) -> Result<Estimate> {
    let stats: RunningStats = run_trials(plan, RunningStats::new, |_, rng| {
        trace_power(&sample_bwe_with(n, b, dist, rng)?, 4)
    })?;
    Ok(Estimate::from_stats(&stats))
}
