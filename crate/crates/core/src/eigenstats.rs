//! Eigenvector statistics: inverse participation ratios, the boundary
//! statistic `Y(Q) = sum_{i,j} (E |psi_i^(j)|^2)^2`, and eigenvalue
//! perturbation checks on the ball-and-chain model.
//!
//! Eigenvector index `j` always means eigenvalue rank (ascending).

use crate::ensemble::BallChain;
use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::montecarlo::Accumulator;
use crate::spectral::{compensated_sum, eigh, EigenSystem};

const NORM_TOL: f64 = 1e-8;

/// `sum_i psi_i^4` of a unit vector.
pub fn ipr(psi: &[f64]) -> Result<f64> {
    if psi.is_empty() {
        return Err(invalid("empty vector"));
    }
    let norm_sq: f64 = psi.iter().map(|x| x * x).sum();
    if (norm_sq.sqrt() - 1.0).abs() > NORM_TOL {
        return Err(invalid(format!("vector is not normalized (norm {})", norm_sq.sqrt())));
    }
    Ok(psi.iter().map(|x| (x * x) * (x * x)).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct IprSummary {
    pub per_vector: Vec<f64>,
    /// `I4(Q)`, between 1 and `N`.
    pub total: f64,
}

pub fn total_ipr(sys: &EigenSystem) -> Result<IprSummary> {
    let per_vector = sys.vectors().map(ipr).collect::<Result<Vec<_>>>()?;
    let total = compensated_sum(per_vector.iter().copied());
    Ok(IprSummary { per_vector, total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct YqEstimate {
    pub value: f64,
    /// Delete-a-group jackknife error; `NaN` when fewer than 4 trials.
    pub stderr: f64,
    pub trials: usize,
    pub bias_corrected: bool,
    /// Plug-in `sum (mean)^2`, biased upward by `O(1/R)`.
    pub naive: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct CellSums {
    count: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl CellSums {
    fn new(cells: usize) -> Self {
        Self { count: 0, sum: vec![0.0; cells], sumsq: vec![0.0; cells] }
    }

    fn add(&mut self, other: &Self) {
        self.count += other.count;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sumsq.iter_mut().zip(&other.sumsq).for_each(|(a, b)| *a += b);
    }

    fn minus(&self, other: &Self) -> Self {
        Self {
            count: self.count - other.count,
            sum: self.sum.iter().zip(&other.sum).map(|(a, b)| a - b).collect(),
            sumsq: self.sumsq.iter().zip(&other.sumsq).map(|(a, b)| a - b).collect(),
        }
    }

    /// Sum over cells of the pairwise estimator `(S^2 - Q) / (R (R - 1))`,
    /// each cell clipped at zero.
    fn unbiased(&self) -> f64 {
        let r = self.count as f64;
        let denom = r * (r - 1.0);
        compensated_sum(
            self.sum
                .iter()
                .zip(&self.sumsq)
                .map(|(s, q)| ((s * s - q) / denom).max(0.0)),
        )
    }

    fn naive(&self) -> f64 {
        let r = self.count as f64;
        compensated_sum(self.sum.iter().map(|s| (s / r) * (s / r)))
    }
}

/// Mergeable per-cell sums of `|psi_i^(j)|^2` and its square, split into
/// jackknife groups by `trial index mod groups`.
#[derive(Clone, Debug, PartialEq)]
pub struct YqAccumulator {
    n: usize,
    groups: Vec<CellSums>,
}

pub const MAX_JACKKNIFE_GROUPS: usize = 20;

/// Group count used for `trials` trials: at least two trials per group.
pub fn jackknife_groups(trials: usize) -> usize {
    (trials / 2).clamp(1, MAX_JACKKNIFE_GROUPS)
}

impl YqAccumulator {
    pub fn new(n: usize, groups: usize) -> Self {
        let groups = groups.max(1);
        Self { n, groups: vec![CellSums::new(n * n); groups] }
    }

    pub fn for_trials(n: usize, trials: usize) -> Self {
        Self::new(n, jackknife_groups(trials))
    }

    pub fn trials(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn add_system(&mut self, index: usize, sys: &EigenSystem) {
        assert_eq!(sys.dim(), self.n, "eigensystem dimension mismatch");
        let g = index % self.groups.len();
        let cells = &mut self.groups[g];
        cells.count += 1;
        for (j, psi) in sys.vectors().enumerate() {
            let base = j * self.n;
            for (i, x) in psi.iter().enumerate() {
                let w = x * x;
                cells.sum[base + i] += w;
                cells.sumsq[base + i] += w * w;
            }
        }
    }

    pub fn estimate(&self) -> Result<YqEstimate> {
        let mut total = CellSums::new(self.n * self.n);
        self.groups.iter().for_each(|g| total.add(g));
        if total.count < 2 {
            return Err(invalid(format!(
                "Y(Q) needs at least 2 trials for bias correction, got {}",
                total.count
            )));
        }
        let value = total.unbiased();
        let live: Vec<&CellSums> = self.groups.iter().filter(|g| g.count > 0).collect();
        let stderr = if live.len() >= 2 && live.iter().all(|g| total.count - g.count >= 2) {
            let loo: Vec<f64> = live.iter().map(|g| total.minus(g).unbiased()).collect();
            let k = loo.len() as f64;
            let mean = loo.iter().sum::<f64>() / k;
            ((k - 1.0) / k * loo.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()).sqrt()
        } else {
            f64::NAN
        };
        Ok(YqEstimate {
            value,
            stderr,
            trials: total.count,
            bias_corrected: true,
            naive: total.naive(),
        })
    }
}

impl Accumulator<EigenSystem> for YqAccumulator {
    fn push(&mut self, index: usize, item: EigenSystem) {
        self.add_system(index, &item);
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.groups.len(), other.groups.len());
        for (a, b) in self.groups.iter_mut().zip(&other.groups) {
            a.add(b);
        }
    }
}

/// Bias-corrected `Y(Q)` from eigensystems of i.i.d. draws.
pub fn yq_estimate(trials: &[EigenSystem]) -> Result<YqEstimate> {
    if trials.len() < 2 {
        return Err(invalid(format!(
            "Y(Q) needs at least 2 trials for bias correction, got {}",
            trials.len()
        )));
    }
    let n = trials[0].dim();
    if trials.iter().any(|t| t.dim() != n) {
        return Err(invalid("trials have inconsistent dimensions"));
    }
    let mut acc = YqAccumulator::for_trials(n, trials.len());
    for (r, sys) in trials.iter().enumerate() {
        acc.add_system(r, sys);
    }
    acc.estimate()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationReport {
    /// `sum_i |lambda_i - lambda_hat_i|^2` over sorted spectra.
    pub lidskii_lhs: f64,
    /// `tr(P^2) = 2 p^2`.
    pub lidskii_rhs: f64,
    /// `||(H_hat - lambda_j) psi_j||_2` for each eigenvector of `H`.
    pub residual_norms: Vec<f64>,
    /// `|p| sqrt(psi_N^2 + psi_{N+1}^2)` for the same vectors.
    pub residual_formula: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvalues_perturbed: Vec<f64>,
}

impl PerturbationReport {
    pub fn lidskii_holds(&self, slack: f64) -> bool {
        self.lidskii_lhs <= self.lidskii_rhs + slack
    }
}

/// Compares the spectra of `h` and `h_hat = h + P` where `P` couples entries
/// `(N, N+1)` and `(N+1, N)` (1-based) of a `2N x 2N` matrix with value `p`.
pub fn perturbation_check(h: &DenseMatrix, h_hat: &DenseMatrix, p: f64) -> Result<PerturbationReport> {
    let dim = h.dim();
    if dim != h_hat.dim() || dim < 4 || dim % 2 != 0 {
        return Err(invalid(format!(
            "expected two 2N x 2N matrices with N >= 2, got {} and {}",
            dim,
            h_hat.dim()
        )));
    }
    let n = dim / 2;
    let base = eigh(h)?;
    let pert = eigh(h_hat)?;
    let lidskii_lhs = compensated_sum(
        base.values()
            .iter()
            .zip(pert.values())
            .map(|(a, b)| (a - b) * (a - b)),
    );
    let mut residual_norms = Vec::with_capacity(dim);
    let mut residual_formula = Vec::with_capacity(dim);
    for (j, psi) in base.vectors().enumerate() {
        let lambda = base.values()[j];
        let mut acc = 0.0;
        for r in 0..dim {
            let hv: f64 = h_hat.row(r).iter().zip(psi).map(|(a, b)| a * b).sum();
            let d = hv - lambda * psi[r];
            acc += d * d;
        }
        residual_norms.push(acc.sqrt());
        residual_formula.push(p.abs() * (psi[n - 1] * psi[n - 1] + psi[n] * psi[n]).sqrt());
    }
    Ok(PerturbationReport {
        lidskii_lhs,
        lidskii_rhs: 2.0 * p * p,
        residual_norms,
        residual_formula,
        eigenvalues: base.values().to_vec(),
        eigenvalues_perturbed: pert.values().to_vec(),
    })
}

pub fn perturbation_check_chain(chain: &BallChain) -> Result<PerturbationReport> {
    perturbation_check(&chain.h, &chain.h_hat, chain.p)
}

/// Fraction of each eigenvector's mass on the first `split` indices.
pub fn leading_mass(sys: &EigenSystem, split: usize) -> Result<Vec<f64>> {
    if split > sys.dim() {
        return Err(Error::InvalidArgument(format!(
            "split {split} exceeds dimension {}",
            sys.dim()
        )));
    }
    Ok(sys
        .vectors()
        .map(|psi| psi[..split].iter().map(|x| x * x).sum::<f64>() / psi.iter().map(|x| x * x).sum::<f64>())
        .collect())
}
