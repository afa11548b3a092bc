use bandwigner::eigenstats::{ipr, perturbation_check_chain, total_ipr, yq_estimate};
use bandwigner::ensemble::{
    block_decompose, build_ball_chain, rng_from_seed, sample_bwe, EntryDistribution,
};
use bandwigner::montecarlo::RunningStats;
use bandwigner::spectral::{band_multiply, eigh, trace_power, BandMatrix, EigenSystem};
use bandwigner::DenseMatrix;
use proptest::prelude::*;
use rand::Rng;

fn dist_strategy() -> impl Strategy<Value = EntryDistribution> {
    prop_oneof![
        Just(EntryDistribution::Gaussian),
        Just(EntryDistribution::FourMomentDiscrete)
    ]
}

/// `(N, b)` with `1 <= b <= N <= max_n`.
fn shape(max_n: usize) -> impl Strategy<Value = (usize, usize)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), 1..=n))
}

fn random_band(n: usize, w: usize, seed: u64) -> BandMatrix {
    let mut rng = rng_from_seed(seed);
    BandMatrix::from_fn(n, w.min(n), |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bwe_is_symmetric_with_band_support((n, b) in shape(40), dist in dist_strategy(), seed: u64) {
        let h = sample_bwe(n, b, dist, seed).unwrap().to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(h[(i, j)], h[(j, i)]);
                if i.abs_diff(j) >= b {
                    prop_assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn decomposition_round_trips(m in 1usize..6, b in 1usize..8, dist in dist_strategy(), seed: u64) {
        let h = sample_bwe(m * b, b, dist, seed).unwrap();
        let d = block_decompose(&h, b).unwrap();
        prop_assert_eq!(d.block_count(), m);
        prop_assert_eq!(d.reassemble(), h.to_dense());
        for l in &d.coupling {
            // couplings of a width-b band are lower triangular
            for i in 0..b {
                for j in i + 1..b {
                    prop_assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn band_product_is_associative(
        n in 1usize..30,
        w in prop::array::uniform3(1usize..6),
        seed: u64,
    ) {
        let x = random_band(n, w[0], seed);
        let y = random_band(n, w[1], seed ^ 1);
        let z = random_band(n, w[2], seed ^ 2);
        let left = band_multiply(&band_multiply(&x, &y).unwrap(), &z).unwrap().to_dense();
        let right = band_multiply(&x, &band_multiply(&y, &z).unwrap()).unwrap().to_dense();
        prop_assert!(left.max_abs_diff(&right) <= 1e-10 * left.max_abs().max(1.0));
        let dense = x.to_dense().matmul(&y.to_dense()).unwrap();
        prop_assert!(band_multiply(&x, &y).unwrap().to_dense().max_abs_diff(&dense) <= 1e-12 * dense.max_abs().max(1.0));
    }

    #[test]
    fn trace_powers_match_eigenvalues((n, b) in shape(64), dist in dist_strategy(), seed: u64) {
        let h = sample_bwe(n, b, dist, seed).unwrap();
        let sys = eigh(&h.to_dense()).unwrap();
        for k in [2usize, 4, 6, 8] {
            let from_eigs: f64 = sys.values().iter().map(|l| l.powi(k as i32)).sum();
            let band = trace_power(&h, k).unwrap();
            prop_assert!((band - from_eigs).abs() <= 1e-8 * from_eigs.max(1.0), "k={} {} vs {}", k, band, from_eigs);
        }
    }

    #[test]
    fn eigh_residual_and_orthonormality((n, b) in shape(64), seed: u64) {
        let h = sample_bwe(n, b, EntryDistribution::Gaussian, seed).unwrap().to_dense();
        let sys = eigh(&h).unwrap();
        prop_assert!(sys.relative_residual(&h) < 1e-8);
        prop_assert!(sys.orthonormality_error() < 1e-8);
        prop_assert!(sys.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ipr_bounds((n, b) in shape(48), dist in dist_strategy(), seed: u64) {
        let h = sample_bwe(n, b, dist, seed).unwrap().to_dense();
        let summary = total_ipr(&eigh(&h).unwrap()).unwrap();
        let nf = n as f64;
        for &v in &summary.per_vector {
            prop_assert!(v >= 1.0 / nf - 1e-12 && v <= 1.0 + 1e-12);
        }
        prop_assert!(summary.total >= 1.0 - 1e-9 && summary.total <= nf + 1e-9);
    }

    #[test]
    fn ipr_of_random_unit_vector(v in prop::collection::vec(-1.0f64..1.0, 1..50)) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let value = ipr(&unit).unwrap();
        prop_assert!(value >= 1.0 / unit.len() as f64 - 1e-12 && value <= 1.0 + 1e-12);
    }

    #[test]
    fn yq_ignores_eigenvector_signs(n in 2usize..16, b in 1usize..16, seed: u64, flips: u64) {
        let b = b.min(n);
        let systems: Vec<EigenSystem> = (0..6)
            .map(|t| eigh(&sample_bwe(n, b, EntryDistribution::Gaussian, seed.wrapping_add(t)).unwrap().to_dense()).unwrap())
            .collect();
        let mut rng = rng_from_seed(flips);
        let flipped: Vec<EigenSystem> = systems
            .iter()
            .map(|s| {
                let vecs = s
                    .vectors()
                    .map(|psi| {
                        let sign = if rng.random::<bool>() { -1.0 } else { 1.0 };
                        psi.iter().map(|x| sign * x).collect()
                    })
                    .collect();
                EigenSystem::from_parts(s.values().to_vec(), vecs).unwrap()
            })
            .collect();
        let a = yq_estimate(&systems).unwrap();
        let f = yq_estimate(&flipped).unwrap();
        prop_assert_eq!(a.value, f.value);
        prop_assert_eq!(a.naive, f.naive);
    }

    #[test]
    fn lidskii_bound(n in 2usize..20, seed: u64) {
        let chain = build_ball_chain(n, seed).unwrap();
        let report = perturbation_check_chain(&chain).unwrap();
        prop_assert!(report.lidskii_holds(1e-10 * (1.0 + report.lidskii_rhs)));
        for (r, f) in report.residual_norms.iter().zip(&report.residual_formula) {
            prop_assert!((r - f).abs() <= 1e-8 * (1.0 + f));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn welford_merge_is_partition_independent(
        values in prop::collection::vec(-1e3f64..1e3, 2..400),
        seed: u64,
    ) {
        let whole = RunningStats::from_slice(&values);
        let mut rng = rng_from_seed(seed);
        for _ in 0..1000 {
            // random contiguous partition merged in random order
            let mut cuts: Vec<usize> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0..=values.len())).collect();
            cuts.push(0);
            cuts.push(values.len());
            cuts.sort_unstable();
            let mut parts: Vec<RunningStats> = cuts.windows(2).map(|w| RunningStats::from_slice(&values[w[0]..w[1]])).collect();
            while parts.len() > 1 {
                let i = rng.random_range(0..parts.len() - 1);
                let right = parts.remove(i + 1);
                parts[i].combine(&right);
            }
            let merged = parts[0];
            prop_assert_eq!(merged.count(), whole.count());
            let (m, w) = (merged.mean().unwrap(), whole.mean().unwrap());
            prop_assert!((m - w).abs() <= 1e-10 * w.abs().max(1.0));
            let (m, w) = (merged.variance().unwrap(), whole.variance().unwrap());
            prop_assert!((m - w).abs() <= 1e-10 * w.abs().max(1.0));
        }
    }
}

#[test]
fn superdiagonal_block_of_square() {
    let (n, b) = (6, 2);
    for seed in 0..20 {
        let h = sample_bwe(n, b, EntryDistribution::Gaussian, seed).unwrap();
        let d = block_decompose(&h, b).unwrap();
        let dense = h.to_dense();
        let sq = dense.matmul(&dense).unwrap();
        for k in 0..d.coupling.len() {
            let expected = d.diagonal[k]
                .matmul(&d.coupling[k])
                .unwrap()
                .add(&d.coupling[k].matmul(&d.diagonal[k + 1]).unwrap())
                .unwrap();
            let block: DenseMatrix = sq.block(k * b, (k + 1) * b, b);
            assert!(block.max_abs_diff(&expected) < 1e-12);
        }
    }
}
