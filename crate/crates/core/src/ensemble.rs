//! Samplers for banded Wigner matrices and the composite models built from
//! them.
//!
//! Bandwidth `b` is a half-width: entry `(i, j)` may be nonzero only when
//! `|i - j| < b`, so `b = 1` is a diagonal matrix and `b = N` a full one.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;

/// Generator used for every draw in the crate.
pub type EnsembleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> EnsembleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Law of the in-band entries. Both kinds have moments `(0, 1, 0, 3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EntryDistribution {
    /// Standard normal.
    #[default]
    Gaussian,
    /// `+sqrt(3)` and `-sqrt(3)` with probability 1/6 each, `0` otherwise.
    FourMomentDiscrete,
}

impl EntryDistribution {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::Gaussian => StandardNormal.sample(rng),
            EntryDistribution::FourMomentDiscrete => match rng.random_range(0..6u32) {
                0 => SQRT_3,
                1 => -SQRT_3,
                _ => 0.0,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntryDistribution::Gaussian => "gaussian",
            EntryDistribution::FourMomentDiscrete => "discrete",
        }
    }
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(EntryDistribution::Gaussian),
            "discrete" | "four-moment-discrete" => Ok(EntryDistribution::FourMomentDiscrete),
            other => Err(invalid(format!(
                "unknown distribution '{other}' (expected gaussian or discrete)"
            ))),
        }
    }
}

/// Symmetric `N x N` matrix with entries confined to `|i - j| < b`.
///
/// Only the upper band is stored: `band[i * b + d]` holds `h[i][i + d]` for
/// `0 <= d < b`. Slots with `i + d >= N` are kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedSymmetricMatrix {
    n: usize,
    b: usize,
    band: Vec<f64>,
}

impl BandedSymmetricMatrix {
    pub fn zeros(n: usize, b: usize) -> Result<Self> {
        check_dims(n, b)?;
        Ok(Self { n, b, band: vec![0.0; n * b] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, 1)?;
        m.band.iter_mut().for_each(|x| *x = 1.0);
        Ok(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), 1)?;
        m.band.copy_from_slice(diag);
        Ok(m)
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper band `j >= i`.
    pub fn from_upper_fn(n: usize, b: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n, b)?;
        for i in 0..n {
            for d in 0..b.min(n - i) {
                m.band[i * b + d] = f(i, i + d);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d < self.b {
            self.band[lo * self.b + d]
        } else {
            0.0
        }
    }

    /// Upper-band values of row `i`: `h[i][i..i + b]`, truncated at `N`.
    pub fn upper_row(&self, i: usize) -> &[f64] {
        let len = self.b.min(self.n - i);
        &self.band[i * self.b..i * self.b + len]
    }

    /// Iterates the stored in-band entries `(i, j, h_ij)` with `j >= i`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.upper_row(i)
                .iter()
                .enumerate()
                .map(move |(d, &v)| (i, i + d, v))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n);
        for (i, j, v) in self.upper_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }
}

fn check_dims(n: usize, b: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("dimension N must be positive"));
    }
    if b == 0 || b > n {
        return Err(invalid(format!("bandwidth b={b} must lie in [1, N={n}]")));
    }
    Ok(())
}

/// One draw law: `BWE(N, b)` with a fixed entry distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub b: usize,
    pub dist: EntryDistribution,
}

impl EnsembleSpec {
    pub fn new(n: usize, b: usize, dist: EntryDistribution) -> Result<Self> {
        check_dims(n, b)?;
        Ok(Self { n, b, dist })
    }

    pub fn sample(&self, seed: u64) -> Result<BandedSymmetricMatrix> {
        sample_bwe(self.n, self.b, self.dist, seed)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BandedSymmetricMatrix> {
        sample_bwe_with(self.n, self.b, self.dist, rng)
    }
}

/// Draws `H ~ BWE(N, b)` from a fresh generator seeded with `seed`.
pub fn sample_bwe(
    n: usize,
    b: usize,
    dist: EntryDistribution,
    seed: u64,
) -> Result<BandedSymmetricMatrix> {
    sample_bwe_with(n, b, dist, &mut rng_from_seed(seed))
}

/// Draws `H ~ BWE(N, b)`; entries are consumed row by row along the upper band.
pub fn sample_bwe_with<R: Rng + ?Sized>(
    n: usize,
    b: usize,
    dist: EntryDistribution,
    rng: &mut R,
) -> Result<BandedSymmetricMatrix> {
    let mut m = BandedSymmetricMatrix::zeros(n, b)?;
    for i in 0..n {
        let len = b.min(n - i);
        for slot in &mut m.band[i * b..i * b + len] {
            *slot = dist.sample(rng);
        }
    }
    Ok(m)
}

/// Draws a strictly lower-triangular `b x b` matrix with i.i.d. entries below
/// the diagonal.
pub fn sample_lte(b: usize, dist: EntryDistribution, seed: u64) -> Result<DenseMatrix> {
    sample_lte_with(b, dist, &mut rng_from_seed(seed))
}

pub fn sample_lte_with<R: Rng + ?Sized>(
    b: usize,
    dist: EntryDistribution,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if b == 0 {
        return Err(invalid("block size b must be positive"));
    }
    let mut m = DenseMatrix::zeros(b);
    for i in 1..b {
        for j in 0..i {
            m[(i, j)] = dist.sample(rng);
        }
    }
    Ok(m)
}

/// Draws a dense `BWE(b, b)` block, i.e. a full symmetric Wigner matrix.
pub fn sample_full_block_with<R: Rng + ?Sized>(
    b: usize,
    dist: EntryDistribution,
    rng: &mut R,
) -> Result<DenseMatrix> {
    Ok(sample_bwe_with(b, b, dist, rng)?.to_dense())
}

/// Block-tridiagonal view of a banded matrix with `N = m * b`.
///
/// ```text
/// [ A_1   L_1                ]
/// [ L_1^T A_2   L_2          ]
/// [       L_2^T A_3  ...     ]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub diagonal: Vec<DenseMatrix>,
    pub coupling: Vec<DenseMatrix>,
    pub block_size: usize,
}

impl BlockDecomposition {
    pub fn block_count(&self) -> usize {
        self.diagonal.len()
    }

    pub fn reassemble(&self) -> DenseMatrix {
        let b = self.block_size;
        let mut out = DenseMatrix::zeros(b * self.diagonal.len());
        for (i, a) in self.diagonal.iter().enumerate() {
            out.set_block(i * b, i * b, a);
        }
        for (i, l) in self.coupling.iter().enumerate() {
            out.set_block(i * b, (i + 1) * b, l);
            out.set_block((i + 1) * b, i * b, &l.transpose());
        }
        out
    }
}

pub fn block_decompose(h: &BandedSymmetricMatrix, b: usize) -> Result<BlockDecomposition> {
    let n = h.dim();
    if b == 0 || n % b != 0 {
        return Err(invalid(format!("N={n} is not a multiple of block size b={b}")));
    }
    if h.bandwidth() > b {
        return Err(invalid(format!(
            "matrix bandwidth {} exceeds block size {b}",
            h.bandwidth()
        )));
    }
    let m = n / b;
    let dense = h.to_dense();
    let diagonal = (0..m).map(|i| dense.block(i * b, i * b, b)).collect();
    let coupling = (0..m.saturating_sub(1))
        .map(|i| dense.block(i * b, (i + 1) * b, b))
        .collect();
    Ok(BlockDecomposition { diagonal, coupling, block_size: b })
}

/// A thin `BWE(N, 2)` block and a full `BWE(N, N)` block on the diagonal of a
/// `2N x 2N` matrix, plus the copy `h_hat` in which entries `(N, N+1)` and
/// `(N+1, N)` (1-based) carry the coupling `p`.
#[derive(Clone, Debug)]
pub struct BallChain {
    pub n: usize,
    pub h: DenseMatrix,
    pub h_hat: DenseMatrix,
    pub p: f64,
}

impl BallChain {
    /// Replaces the coupling value, keeping the diagonal blocks.
    pub fn with_coupling(mut self, p: f64) -> Self {
        let (r, c) = self.coupling_position();
        self.h_hat[(r, c)] = p;
        self.h_hat[(c, r)] = p;
        self.p = p;
        self
    }

    /// Zero-based `(row, col)` of the upper coupling entry.
    pub fn coupling_position(&self) -> (usize, usize) {
        (self.n - 1, self.n)
    }

    pub fn perturbation(&self) -> DenseMatrix {
        let mut p = DenseMatrix::zeros(2 * self.n);
        let (r, c) = self.coupling_position();
        p[(r, c)] = self.p;
        p[(c, r)] = self.p;
        p
    }
}

pub fn build_ball_chain(n: usize, seed: u64) -> Result<BallChain> {
    build_ball_chain_with(n, EntryDistribution::Gaussian, &mut rng_from_seed(seed))
}

pub fn build_ball_chain_with<R: Rng + ?Sized>(
    n: usize,
    dist: EntryDistribution,
    rng: &mut R,
) -> Result<BallChain> {
    if n < 2 {
        return Err(invalid(format!("ball-and-chain needs N >= 2, got {n}")));
    }
    let thin = sample_bwe_with(n, 2, dist, rng)?;
    let ball = sample_bwe_with(n, n, dist, rng)?;
    let p: f64 = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2)
        .expect("valid normal parameters")
        .sample(rng);

    let mut h = DenseMatrix::zeros(2 * n);
    h.set_block(0, 0, &thin.to_dense());
    h.set_block(n, n, &ball.to_dense());
    let chain = BallChain { n, h_hat: h.clone(), h, p: 0.0 };
    Ok(chain.with_coupling(p))
}
