//! Closed-form trace moments of `BWE(N, b)` and the critical bandwidths of
//! the normalized fourth moment.
//!
//! Everything except the root finder is evaluated in exact rational
//! arithmetic; intermediate values reach `O(N^4)` and would overflow `i64`
//! for `N` around `10^5`.
//!
//! Two expressions for `m4(N, b)` circulate for this ensemble. The one
//! obtained by composing the block traces ([`m4_sigma`]) matches exact
//! enumeration of `E tr H^4`; the more compact display [`m4_sigma_stated`]
//! does not (at `N = 4, b = 2` it gives `1464/588 = 2.4898` instead of `2.48`).
//! Both are kept so the discrepancy stays testable.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

fn int(v: i128) -> BigInt {
    BigInt::from(v)
}

fn ratio(num: i128, den: i128) -> BigRational {
    BigRational::new(int(num), int(den))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Expected traces of products of `A ~ BWE(b, b)` and independent strictly
/// lower-triangular blocks `L, L_1, L_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTraces {
    pub b: usize,
    /// `E tr(A^4)`
    pub tr_a4: BigRational,
    /// `E tr(A^2 L L^T)`
    pub tr_a2_llt: BigRational,
    /// `E tr(A^2 L^T L)`
    pub tr_a2_ltl: BigRational,
    /// `E tr(L_1^T L_1 L_2 L_2^T)`
    pub tr_l1_l2: BigRational,
    /// `E tr(L L^T L L^T)`
    pub tr_llt_llt: BigRational,
}

impl BlockTraces {
    pub fn as_f64(&self) -> [f64; 5] {
        [
            to_f64(&self.tr_a4),
            to_f64(&self.tr_a2_llt),
            to_f64(&self.tr_a2_ltl),
            to_f64(&self.tr_l1_l2),
            to_f64(&self.tr_llt_llt),
        ]
    }

    /// `E tr H^4` for `N = m b` assembled from the block expectations.
    ///
    /// Requires `m >= 2` (the coupling blocks must exist).
    pub fn compose_tr_h4(&self, m: usize) -> Result<BigRational> {
        if m < 2 {
            return Err(invalid(format!("block composition needs m >= 2, got {m}")));
        }
        let m = m as i128;
        let k = |v: i128| BigRational::from_integer(int(v));
        Ok(k(m) * &self.tr_a4
            + k(6 * m - 8) * &self.tr_a2_llt
            + k(2 * m) * &self.tr_a2_ltl
            + k(4 * m - 8) * &self.tr_l1_l2
            + k(2 * m - 2) * &self.tr_llt_llt)
    }
}

pub fn block_traces(b: usize) -> Result<BlockTraces> {
    if b < 1 {
        return Err(invalid("block size b must be at least 1"));
    }
    let b = b as i128;
    let (b2, b3) = (b * b, b * b * b);
    Ok(BlockTraces {
        b: b as usize,
        tr_a4: ratio(2 * b3 + b2, 1),
        tr_a2_llt: ratio(b3 - b2, 2),
        tr_a2_ltl: ratio(b3 - b2, 2),
        tr_l1_l2: ratio(b3 - 3 * b2 + 2 * b, 6),
        tr_llt_llt: ratio(4 * b3 - 3 * b2 - b, 6),
    })
}

fn check_nb(n: usize, b: usize) -> Result<()> {
    if n == 0 || b == 0 || b > n {
        return Err(invalid(format!("need 1 <= b <= N, got N={n}, b={b}")));
    }
    Ok(())
}

/// `E tr H^2 = 2Nb - N - b^2 + b`, the number of in-band positions.
pub fn exact_tr_h2(n: usize, b: usize) -> Result<u128> {
    check_nb(n, b)?;
    let (n, b) = (n as u128, b as u128);
    Ok(2 * n * b + b - n - b * b)
}

/// Where the fourth-moment polynomial is derived (`b <= N/2`, `b | N`).
pub fn in_formula_domain(n: usize, b: usize) -> bool {
    b >= 1 && 2 * b <= n && n % b == 0
}

fn check_domain(n: usize, b: usize, extrapolate: bool) -> Result<()> {
    check_nb(n, b)?;
    if extrapolate || in_formula_domain(n, b) {
        return Ok(());
    }
    let reason = if 2 * b > n {
        "b > N/2".to_string()
    } else {
        format!("N is not a multiple of b (N mod b = {})", n % b)
    };
    Err(Error::Domain { n, b, reason })
}

/// `E tr H^4 = (24Nb^2 - 18Nb + 3N - 20b^3 + 27b^2 - 7b) / 3`.
///
/// Outside [`in_formula_domain`] this fails unless `extrapolate` is set, in
/// which case the same polynomial is evaluated anyway.
pub fn exact_tr_h4(n: usize, b: usize, extrapolate: bool) -> Result<BigRational> {
    check_domain(n, b, extrapolate)?;
    let (n, b) = (n as i128, b as i128);
    let num = int(24) * int(n) * int(b) * int(b) - int(18 * n * b) + int(3 * n)
        - int(20) * int(b) * int(b) * int(b)
        + int(27 * b * b)
        - int(7 * b);
    Ok(BigRational::new(num, int(3)))
}

/// `m4(sigma_{N,b}) = N E tr H^4 / (E tr H^2)^2`.
pub fn m4_sigma(n: usize, b: usize, extrapolate: bool) -> Result<BigRational> {
    let tr4 = exact_tr_h4(n, b, extrapolate)?;
    let tr2 = BigInt::from(exact_tr_h2(n, b)?);
    Ok(tr4 * BigRational::from_integer(int(n as i128)) / BigRational::from_integer(&tr2 * &tr2))
}

/// The compact closed form
/// `(6N^2(4b^2+b+1) - 5Nb(4b+1)(b-1)) / (3b^2(2N-b+1)^2)`.
///
/// It disagrees with [`m4_sigma`] and with enumeration; kept for comparison.
pub fn m4_sigma_stated(n: usize, b: usize) -> Result<BigRational> {
    check_nb(n, b)?;
    let (n, b) = (int(n as i128), int(b as i128));
    let one = int(1);
    let num = int(6) * &n * &n * (int(4) * &b * &b + &b + &one)
        - int(5) * &n * &b * (int(4) * &b + &one) * (&b - &one);
    let tail = int(2) * &n - &b + &one;
    let den = int(3) * &b * &b * &tail * &tail;
    if den.is_zero() {
        return Err(invalid("stated formula has a vanishing denominator"));
    }
    Ok(BigRational::new(num, den))
}

/// Same polynomial as [`m4_sigma`] with real-valued `N` and `b`.
pub fn m4_sigma_real(n: f64, b: f64) -> f64 {
    let tr2 = 2.0 * n * b - n - b * b + b;
    let tr4 = (24.0 * n * b * b - 18.0 * n * b + 3.0 * n - 20.0 * b * b * b + 27.0 * b * b
        - 7.0 * b)
        / 3.0;
    n * tr4 / (tr2 * tr2)
}

/// Bundled exact moments for one `(N, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFormulaReport {
    pub n: usize,
    pub b: usize,
    pub tr_h2: u128,
    pub tr_h4: BigRational,
    pub m4: BigRational,
    /// Set when `(N, b)` lies outside [`in_formula_domain`].
    pub extrapolated: bool,
}

pub fn moment_formula_report(n: usize, b: usize, extrapolate: bool) -> Result<MomentFormulaReport> {
    Ok(MomentFormulaReport {
        n,
        b,
        tr_h2: exact_tr_h2(n, b)?,
        tr_h4: exact_tr_h4(n, b, extrapolate)?,
        m4: m4_sigma(n, b, extrapolate)?,
        extrapolated: !in_formula_domain(n, b),
    })
}

/// Large-`N` limit of `m4(N, cN)`: `(24 - 20c) / (3 (2 - c)^2)`.
///
/// Tends to the semicircle value 2 as `c -> 0` and peaks at `c = 2/5` with
/// value `25/12`.
pub fn m4_limit_curve(c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(invalid(format!("c={c} must lie in (0, 1/2]")));
    }
    Ok((24.0 - 20.0 * c) / (3.0 * (2.0 - c) * (2.0 - c)))
}

/// Coefficients `[c0, c1, c2, c3, c4]` of the quartic numerator of
/// `d m4 / db` in powers of `b`.
pub fn m4_derivative_coefficients(n: f64) -> [f64; 5] {
    let n2 = n * n;
    let n3 = n2 * n;
    [
        6.0 * n3 + n2,
        -(12.0 * n3 + 10.0 * n2 - 7.0 * n),
        6.0 * n2 - 21.0 * n,
        8.0 * n2 + 34.0 * n,
        -20.0 * n,
    ]
}

/// Numerator of `d m4 / db`; the denominator `3 (2Nb - N - b^2 + b)^3` is
/// positive wherever the second moment is, so signs agree.
pub fn m4_derivative_numerator(n: f64, b: f64) -> f64 {
    let c = m4_derivative_coefficients(n);
    c.iter().rev().fold(0.0, |acc, &k| acc * b + k)
}

fn m4_derivative_numerator_slope(n: f64, b: f64) -> f64 {
    let c = m4_derivative_coefficients(n);
    (1..5).rev().fold(0.0, |acc, p| acc * b + p as f64 * c[p])
}

/// Roots of the derivative numerator between 1 and `N/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoints {
    pub n: usize,
    /// Root near `sqrt(3N/2)`, a local minimum of `m4`.
    pub b_small: f64,
    /// Root near `2N/5`, a local maximum of `m4`.
    pub b_large: f64,
    pub residual_small: f64,
    pub residual_large: f64,
}

impl CriticalPoints {
    pub fn small_ratio(&self) -> f64 {
        self.b_small / (1.5 * self.n as f64).sqrt()
    }

    pub fn large_ratio(&self) -> f64 {
        self.b_large / (0.4 * self.n as f64)
    }
}

const SCAN_POINTS_PER_DECADE: usize = 64;
const ROOT_REL_TOL: f64 = 1e-10;

pub fn critical_points(n: usize) -> Result<CriticalPoints> {
    if n < 16 {
        return Err(invalid(format!("critical point search needs N >= 16, got {n}")));
    }
    let nf = n as f64;
    let f = |b: f64| m4_derivative_numerator(nf, b);
    let lo = 1.0_f64;
    let hi = nf / 2.0;
    let steps = ((hi / lo).log10() * SCAN_POINTS_PER_DECADE as f64).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect();

    let mut brackets = Vec::new();
    for w in grid.windows(2) {
        let (fa, fb) = (f(w[0]), f(w[1]));
        if fa == 0.0 || fa.signum() != fb.signum() {
            brackets.push((w[0], w[1]));
        }
    }
    if brackets.len() != 2 {
        let signs: String = grid
            .iter()
            .step_by(SCAN_POINTS_PER_DECADE / 4)
            .map(|&b| if f(b) > 0.0 { '+' } else { '-' })
            .collect();
        return Err(Error::Bracketing {
            n,
            diagnostics: format!(
                "expected 2 sign changes on [1, N/2], found {} over {} grid points (coarse signs {signs})",
                brackets.len(),
                grid.len()
            ),
        });
    }
    let slope = |b: f64| m4_derivative_numerator_slope(nf, b);
    let b_small = bisect_newton(&f, &slope, brackets[0].0, brackets[0].1, ROOT_REL_TOL)?;
    let b_large = bisect_newton(&f, &slope, brackets[1].0, brackets[1].1, ROOT_REL_TOL)?;
    Ok(CriticalPoints {
        n,
        b_small,
        b_large,
        residual_small: f(b_small),
        residual_large: f(b_large),
    })
}

/// Bisection on a sign-changing bracket down to a coarse width, followed by a
/// Newton polish that falls back to bisection whenever a step leaves the
/// bracket.
pub fn bisect_newton(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical(format!(
            "interval [{lo}, {hi}] does not bracket a root (f = {f_lo:e}, {f_hi:e})"
        )));
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= rel_tol * x.abs() || (hi - lo) <= rel_tol * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "root polish did not converge on [{lo}, {hi}]"
    )))
}
