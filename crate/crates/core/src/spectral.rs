//! Banded products, even trace powers, dense symmetric eigendecomposition and
//! the normalized spectral moment estimator.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use rand::Rng;

use crate::ensemble::{rng_from_seed, BandedSymmetricMatrix};
use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// General (not necessarily symmetric) `N x N` band matrix with entries
/// allowed where `|i - j| < w`.
///
/// Row `i` stores the `2w - 1` diagonals `j - i = -(w-1) ..= w-1`; slots that
/// fall outside the matrix stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, w: usize) -> Result<Self> {
        if n == 0 || w == 0 || w > n {
            return Err(invalid(format!("band width w={w} must lie in [1, N={n}]")));
        }
        Ok(Self { n, w, data: vec![0.0; n * (2 * w - 1)] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), 1)?;
        m.data.copy_from_slice(diag);
        Ok(m)
    }

    pub fn from_fn(n: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n, w)?;
        for i in 0..n {
            for j in m.col_range(i) {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    pub fn from_symmetric(h: &BandedSymmetricMatrix) -> Self {
        let mut m = Self::zeros(h.dim(), h.bandwidth()).expect("validated dimensions");
        for (i, j, v) in h.upper_entries() {
            m.set(i, j, v);
            m.set(j, i, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    fn stride(&self) -> usize {
        2 * self.w - 1
    }

    /// Columns that may hold nonzeros in row `i`.
    #[inline]
    pub fn col_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.w - 1)..(i + self.w).min(self.n)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) >= self.w {
            return 0.0;
        }
        self.data[i * self.stride() + (j + self.w - 1 - i)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) < self.w, "({i}, {j}) outside band of width {}", self.w);
        let s = self.stride();
        self.data[i * s + (j + self.w - 1 - i)] = v;
    }

    /// Row `i` restricted to [`col_range`](Self::col_range).
    #[inline]
    fn row_slice(&self, i: usize) -> &[f64] {
        let s = self.stride();
        let start = i * s + (self.w - 1) - (i - self.col_range(i).start);
        &self.data[start..start + self.col_range(i).len()]
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        compensated_sum(self.data.iter().map(|x| x * x))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, |i, j| self.get(i, j))
    }
}

/// Exact product of two band matrices; the result has width
/// `wx + wy - 1`, clipped at `N`.
pub fn band_multiply(x: &BandMatrix, y: &BandMatrix) -> Result<BandMatrix> {
    if x.n != y.n {
        return Err(invalid(format!("dimension mismatch: {} vs {}", x.n, y.n)));
    }
    let n = x.n;
    let w = (x.w + y.w - 1).min(n);
    let mut out = BandMatrix::zeros(n, w)?;
    let out_stride = out.stride();
    for i in 0..n {
        let xr = x.col_range(i);
        let out_row = &mut out.data[i * out_stride..(i + 1) * out_stride];
        // out_row[j + w - 1 - i] holds (i, j)
        for (k, &xv) in xr.clone().zip(x.row_slice(i)) {
            if xv == 0.0 {
                continue;
            }
            let yr = y.col_range(k);
            let offset = yr.start + w - 1 - i;
            for (o, &yv) in out_row[offset..offset + yr.len()].iter_mut().zip(y.row_slice(k)) {
                *o += xv * yv;
            }
        }
    }
    Ok(out)
}

/// `tr(H^k)` for `k` in `{2, 4, 6, 8}`, evaluated as `||H^{k/2}||_F^2`.
pub fn trace_power(h: &BandedSymmetricMatrix, k: usize) -> Result<f64> {
    Ok(trace_powers(h, &[k])?[0])
}

/// Several even trace powers sharing the intermediate products.
pub fn trace_powers(h: &BandedSymmetricMatrix, ks: &[usize]) -> Result<Vec<f64>> {
    for &k in ks {
        if !matches!(k, 2 | 4 | 6 | 8) {
            return Err(invalid(format!(
                "trace power k={k} unsupported (expected one of 2, 4, 6, 8)"
            )));
        }
    }
    let need = |k: usize| ks.contains(&k);
    let h1 = BandMatrix::from_symmetric(h);
    let h2 = if need(4) || need(6) || need(8) {
        Some(band_multiply(&h1, &h1)?)
    } else {
        None
    };
    let h3 = match (&h2, need(6)) {
        (Some(h2), true) => Some(band_multiply(h2, &h1)?),
        _ => None,
    };
    let h4 = match (&h2, need(8)) {
        (Some(h2), true) => Some(band_multiply(h2, h2)?),
        _ => None,
    };
    Ok(ks
        .iter()
        .map(|&k| match k {
            2 => h1.frobenius_norm_sq(),
            4 => h2.as_ref().unwrap().frobenius_norm_sq(),
            6 => h3.as_ref().unwrap().frobenius_norm_sq(),
            _ => h4.as_ref().unwrap().frobenius_norm_sq(),
        })
        .collect())
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    n: usize,
    values: Vec<f64>,
    /// Column-major: eigenvector `j` occupies `vectors[j*n..(j+1)*n]`.
    vectors: Vec<f64>,
}

impl EigenSystem {
    /// Assembles an eigensystem from explicit parts. Vectors are given one per
    /// eigenvalue in the same order.
    pub fn from_parts(values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if vectors.len() != n || vectors.iter().any(|v| v.len() != n) {
            return Err(invalid("eigenvector count or length does not match eigenvalues"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("eigenvalues must be sorted ascending"));
        }
        Ok(Self { n, values, vectors: vectors.concat() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n)
    }

    /// `max_j ||H psi_j - lambda_j psi_j||_2 / ||H||_F`.
    pub fn relative_residual(&self, h: &DenseMatrix) -> f64 {
        let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for (j, psi) in self.vectors().enumerate() {
            let mut acc = 0.0;
            for i in 0..self.n {
                let hv: f64 = h.row(i).iter().zip(psi).map(|(a, b)| a * b).sum();
                let r = hv - self.values[j] * psi[i];
                acc += r * r;
            }
            worst = worst.max(acc.sqrt());
        }
        worst / scale
    }

    /// Max-abs deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.n {
            for b in a..self.n {
                let dot: f64 = self.vector(a).iter().zip(self.vector(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for (j, psi) in self.vectors().enumerate() {
            let l = self.values[j];
            for r in 0..n {
                let s = l * psi[r];
                for c in 0..n {
                    out[(r, c)] += s * psi[c];
                }
            }
        }
        out
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric eigendecomposition, run single-threaded so that trial
/// level parallelism owns the cores.
pub fn eigh(h: &DenseMatrix) -> Result<EigenSystem> {
    let n = h.dim();
    if n == 0 {
        return Err(invalid("empty matrix"));
    }
    let asym = h.asymmetry();
    if asym > SYMMETRY_TOL * h.max_abs().max(1.0) {
        return Err(invalid(format!("matrix is not symmetric (max |h_ij - h_ji| = {asym:e})")));
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)]);
    let mut s = Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let par = Par::Seq;
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed for N={n}: {e:?}")))?;

    let values: Vec<f64> = (0..n).map(|i| s.column_vector()[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite eigenvalue for N={n}")));
    }
    let mut vectors = Vec::with_capacity(n * n);
    for j in 0..n {
        vectors.extend(u.col(j).iter().copied());
    }
    let mut sys = EigenSystem { n, values, vectors };
    sys.sort_ascending();
    Ok(sys)
}

impl EigenSystem {
    fn sort_ascending(&mut self) {
        if self.values.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        let values = order.iter().map(|&j| self.values[j]).collect();
        let vectors = order.iter().flat_map(|&j| self.vector(j).to_vec()).collect();
        self.values = values;
        self.vectors = vectors;
    }
}

/// Estimate of `m_k(sigma_N)` from per-trial traces.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub k: usize,
    pub m_k: f64,
    pub stderr: f64,
    /// `sqrt(m2(rho) / m0(rho))`
    pub eta: f64,
    /// `sqrt(m2(rho) / m0(rho)^3)`
    pub nu: f64,
    pub trials: usize,
}

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

fn ratio_estimate(n: usize, k: usize, mean_tr2: f64, mean_trk: f64) -> f64 {
    let half = (k / 2) as i32;
    (n as f64).powi(half - 1) * mean_trk / mean_tr2.powi(half)
}

/// `m_k = N^{k/2-1} mean(tr H^k) / mean(tr H^2)^{k/2}` with a nonparametric
/// bootstrap standard error over trials.
pub fn normalized_moment(
    n: usize,
    k: usize,
    tr2: &[f64],
    trk: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<MomentReport> {
    if k == 0 || k % 2 != 0 {
        return Err(invalid(format!("moment order k={k} must be a positive even integer")));
    }
    if tr2.len() != trk.len() {
        return Err(invalid("trace sample lengths differ"));
    }
    let r = tr2.len();
    if r < 2 {
        return Err(invalid(format!("need at least 2 trials, got {r}")));
    }
    let mean = |v: &[f64]| compensated_sum(v.iter().copied()) / v.len() as f64;
    let (m2, mk) = (mean(tr2), mean(trk));
    let point = ratio_estimate(n, k, m2, mk);

    let mut rng = rng_from_seed(seed);
    let mut boot = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut s2, mut sk) = (0.0, 0.0);
        for _ in 0..r {
            let t = rng.random_range(0..r);
            s2 += tr2[t];
            sk += trk[t];
        }
        boot.push(ratio_estimate(n, k, s2 / r as f64, sk / r as f64));
    }
    let stderr = if boot.len() >= 2 {
        let bm = boot.iter().sum::<f64>() / boot.len() as f64;
        (boot.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (boot.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    let nf = n as f64;
    Ok(MomentReport {
        k,
        m_k: point,
        stderr,
        eta: (m2 / nf).sqrt(),
        nu: (m2 / (nf * nf * nf)).sqrt(),
        trials: r,
    })
}
