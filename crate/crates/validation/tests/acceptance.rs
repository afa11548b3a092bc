//! Acceptance suite. Runs every criterion at its stated size and tolerance,
//! prints one PASS/FAIL line per criterion, and exits non-zero if any fail.
//!
//! Run alone with `cargo test -p bandwigner-validation --test acceptance`;
//! `ACCEPTANCE_ONLY=5,7` restricts the run to the listed criteria.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bandwigner::eigenstats::{perturbation_check_chain, yq_estimate};
use bandwigner::ensemble::{build_ball_chain, rng_from_seed, sample_bwe, EntryDistribution};
use bandwigner::exact::{
    critical_points, exact_tr_h4, block_traces, m4_limit_curve, m4_sigma, m4_sigma_stated, to_f64,
};
use bandwigner::montecarlo::{RunningStats, TrialPlan};
use bandwigner::spectral::{eigh, trace_power, EigenSystem};
use bandwigner::verify::{block_traces_monte_carlo, tr_h4_monte_carlo};
use bandwigner_cli::commands::{cmd_ipr, cmd_moments, cmd_yq};
use bandwigner_cli::config::{BandGrid, Command, ExperimentConfig};
use bandwigner_cli::Table;
use rand::Rng;

const MAX_Z: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(command: Command, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let map: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_map(command, &map).expect("valid acceptance config")
}

fn c_grid() -> Vec<f64> {
    (1..=19).map(|i| (i as f64 * 0.05 * 1e12).round() / 1e12).collect()
}

fn z(mean: f64, expected: f64, stderr: f64) -> f64 {
    let d = (mean - expected).abs();
    if d == 0.0 { 0.0 } else { d / stderr }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Highest point that exceeds both neighbours; `None` for a monotone curve.
fn interior_argmax(v: &[f64]) -> Option<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .fold(None, |best: Option<usize>, i| match best {
            Some(j) if v[j] >= v[i] => Some(j),
            _ => Some(i),
        })
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best })
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    t.floats(name).into_iter().map(|v| v.expect("numeric column")).collect()
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn block_trace_suite() -> Outcome {
    let names = ["tr(A^4)", "tr(A^2 LL^T)", "tr(A^2 L^T L)", "tr(L1^T L1 L2 L2^T)", "tr(LL^T LL^T)"];
    let mut worst = (0.0_f64, String::new());
    let mut pass = true;
    for b in [1usize, 2, 3, 5, 8] {
        let expected = block_traces(b).unwrap().as_f64();
        let est = block_traces_monte_carlo(b, EntryDistribution::Gaussian, &TrialPlan::new(100 + b as u64, 100_000)).unwrap();
        for ((e, x), name) in est.iter().zip(expected).zip(names) {
            let zz = e.z_score(x);
            pass &= zz <= MAX_Z;
            if zz >= worst.0 {
                worst = (zz, format!("{name} at b={b}: {:.4} +- {:.4} vs {x}", e.mean, e.stderr));
            }
        }
    }
    outcome(pass, format!("25 traces, worst |z| = {:.2} ({})", worst.0, worst.1))
}

fn tr_h4_reconciliation() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0_f64;
    for (n, b) in [(4usize, 2usize), (6, 2), (6, 3), (8, 4), (12, 3)] {
        let exact = to_f64(&exact_tr_h4(n, b, false).unwrap());
        let est = tr_h4_monte_carlo(n, b, EntryDistribution::Gaussian, &TrialPlan::new(200 + n as u64 * 16 + b as u64, 100_000)).unwrap();
        let zz = est.z_score(exact);
        worst = worst.max(zz);
        pass &= zz <= MAX_Z;
    }
    // The statement's display implies E tr H^4 = m4 (tr H^2)^2 / N at (4, 2).
    // At 1e5 matrices its 0.25 offset is only ~1.3 SE, so the discrepancy is
    // resolved with a 4e6-matrix run.
    let stated = to_f64(&m4_sigma_stated(4, 2).unwrap()) * 100.0 / 4.0;
    let big = tr_h4_monte_carlo(4, 2, EntryDistribution::Gaussian, &TrialPlan::new(299, 4_000_000)).unwrap();
    let z_proof = big.z_score(62.0);
    let z_stated = big.z_score(stated);
    pass &= z_proof <= MAX_Z && z_stated > MAX_Z;
    outcome(
        pass,
        format!(
            "5 points agree with proof formula, worst |z| = {worst:.2}; at (4,2) with 4e6 matrices E tr H^4 = {:.4} +- {:.4}: |z| = {z_proof:.2} vs 62, |z| = {z_stated:.1} vs statement-implied {stated:.4}",
            big.mean, big.stderr
        ),
    )
}

fn critical_asymptotics() -> Outcome {
    let mut prev: Option<(f64, f64)> = None;
    let mut monotone = true;
    let mut devs = Vec::new();
    for n in [1_000usize, 10_000, 100_000, 1_000_000] {
        let cp = critical_points(n).unwrap();
        let d = ((cp.small_ratio() - 1.0).abs(), (cp.large_ratio() - 1.0).abs());
        if let Some(p) = prev {
            monotone &= d.0 < p.0 && d.1 < p.1;
        }
        prev = Some(d);
        devs.push(format!("N={n}: {:.2e}/{:.2e}", d.0, d.1));
    }
    let (ds, dl) = prev.unwrap();
    outcome(
        monotone && ds < 0.01 && dl < 0.01,
        format!("|ratio-1| small/large: {}", devs.join(", ")),
    )
}

fn limit_curve() -> Outcome {
    let finite = to_f64(&m4_sigma(1_000_000, 400_000, true).unwrap());
    let err = (finite - 25.0 / 12.0).abs();
    let h = 1e-4;
    let deriv = (m4_limit_curve(0.4 + h).unwrap() - m4_limit_curve(0.4 - h).unwrap()) / (2.0 * h);
    outcome(
        err < 1e-3 && deriv.abs() < 1e-6,
        format!("|m4(1e6, 4e5) - 25/12| = {err:.2e}; d/dc at 2/5 = {deriv:.2e}"),
    )
}

fn fourth_moment_curve() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [100usize, 200] {
        let mut cfg = config(Command::Moments, &[("n", &n.to_string()), ("k", "4"), ("trials", "400"), ("seed", "5")]);
        cfg.grid = BandGrid::C(c_grid());
        let t = cmd_moments(&cfg).unwrap();
        let (m, se, c, b) = (column(&t, "m_k"), column(&t, "stderr"), column(&t, "c"), column(&t, "b"));
        // m4 tends to 3 as b -> 1, so the hump is a local, not global, maximum
        let Some(top) = interior_argmax(&m) else {
            pass = false;
            parts.push(format!("N={n}: no interior maximum"));
            continue;
        };
        let interior_max = (0.3..=0.5).contains(&c[top]);
        // minimum below the maximum, away from the smallest bandwidth
        let low = argmin(&m[..top]);
        let scale = (1.5 * n as f64).sqrt();
        let dip = low > 0 && (0.5..=2.0).contains(&(b[low] / scale));
        let exact = t.floats("exact_m4_extrapolated");
        let worst = exact
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|e| z(m[i], e, se[i])))
            .fold(0.0, f64::max);
        pass &= interior_max && dip && worst <= MAX_Z;
        parts.push(format!(
            "N={n}: interior argmax c={}, min at b={} ({:.2} sqrt(3N/2)), worst |z| vs exact {worst:.2}",
            c[top],
            b[low],
            b[low] / scale
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ipr_slopes() -> Outcome {
    let n = 2000usize;
    let target = 2.0 * (n as f64).ln();
    let fit = |grid: &str| {
        let cfg = config(Command::Ipr, &[("n", "2000"), ("alpha-grid", grid), ("trials", "5"), ("seed", "6")]);
        let t = cmd_ipr(&cfg).unwrap();
        let alpha = column(&t, "alpha");
        let realized: Vec<f64> = column(&t, "b").iter().map(|b| b.ln() / (n as f64).ln()).collect();
        let y = column(&t, "log_ipr");
        (least_squares_slope(&alpha, &y), least_squares_slope(&realized, &y))
    };
    let (low, low_realized) = fit("0.2:0.45:0.05");
    let (high, high_realized) = fit("0.6:0.9:0.05");
    let low_ok = (low + target).abs() <= 0.25 * target;
    let high_ok = high.abs() <= 0.25 * target;
    outcome(
        low_ok && high_ok,
        format!(
            "slope on [0.2,0.45] = {low:.2} (target {:.2} +- {:.2}; realized-alpha fit {low_realized:.2}), on [0.6,0.9] = {high:.2} (|.| <= {:.2}; realized {high_realized:.2})",
            -target,
            0.25 * target,
            0.25 * target
        ),
    )
}

fn yq_curve() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [100usize, 200] {
        let mut cfg = config(Command::Yq, &[("n", &n.to_string()), ("trials", "800"), ("seed", "7")]);
        let mut grid = vec![1.0 / n as f64];
        grid.extend(c_grid());
        grid.push(1.0);
        cfg.grid = BandGrid::C(grid);
        let t = cmd_yq(&cfg).unwrap();
        let (y, se, c, b) = (column(&t, "y"), column(&t, "stderr"), column(&t, "c"), column(&t, "b"));
        let last = y.len() - 1;
        assert_eq!((b[0], b[last]), (1.0, n as f64));
        let top = argmax(&y);
        let interior = top > 0 && top < last && (0.3..=0.5).contains(&c[top]);
        let (z1, zn) = (z(y[0], 1.0, se[0]), z(y[last], 1.0, se[last]));
        pass &= interior && z1 <= MAX_Z && zn <= MAX_Z;
        parts.push(format!(
            "N={n}: argmax c={} (Y={:.4}), Y(b=1)={:.4} |z|={z1:.2}, Y(b=N)={:.5} |z|={zn:.2}",
            c[top], y[top], y[0], y[last]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn property_suites() -> Outcome {
    let mut rng = rng_from_seed(8);
    let mut worst_eig = 0.0_f64;
    let mut worst_trace = 0.0_f64;
    for _ in 0..60 {
        let n = rng.random_range(1..=64usize);
        let b = rng.random_range(1..=n);
        let h = sample_bwe(n, b, EntryDistribution::Gaussian, rng.random()).unwrap();
        let dense = h.to_dense();
        let sys = eigh(&dense).unwrap();
        worst_eig = worst_eig.max(sys.relative_residual(&dense)).max(sys.orthonormality_error());
        for k in [2usize, 4, 6, 8] {
            let eig: f64 = sys.values().iter().map(|l| l.powi(k as i32)).sum();
            worst_trace = worst_trace.max((trace_power(&h, k).unwrap() - eig).abs() / eig.max(1.0));
        }
    }

    let lidskii = (0..100u64).all(|seed| {
        let r = perturbation_check_chain(&build_ball_chain(30, seed).unwrap()).unwrap();
        r.lidskii_holds(1e-10 * (1.0 + r.lidskii_rhs))
    });

    let identity = EigenSystem::from_parts(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let swapped = EigenSystem::from_parts(vec![0.0, 1.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let (mut corrected, mut naive) = (RunningStats::new(), RunningStats::new());
    for _ in 0..100 {
        let draws: Vec<EigenSystem> = (0..4)
            .map(|_| if rng.random::<bool>() { identity.clone() } else { swapped.clone() })
            .collect();
        let est = yq_estimate(&draws).unwrap();
        corrected.update(est.value);
        naive.update(est.naive);
    }
    let z_corr = z(corrected.mean().unwrap(), 1.0, corrected.stderr().unwrap());
    let z_naive = z(naive.mean().unwrap(), 1.25, naive.stderr().unwrap());

    let run = |w: &str| {
        let cfg = config(
            Command::Moments,
            &[("n", "60"), ("c-grid", "0.1,0.4"), ("k", "2,4,6"), ("trials", "100"), ("workers", w)],
        );
        cmd_moments(&cfg).unwrap()
    };
    let base = run("1");
    let mut max_rel = 0.0_f64;
    for w in ["4", "8"] {
        let other = run(w);
        for name in ["m_k", "stderr"] {
            for (a, b) in column(&base, name).iter().zip(column(&other, name)) {
                max_rel = max_rel.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
            }
        }
    }

    let pass = worst_eig < 1e-8 && worst_trace < 1e-8 && lidskii && z_corr <= MAX_Z && z_naive <= MAX_Z && max_rel <= 1e-10;
    outcome(
        pass,
        format!(
            "eigh err {worst_eig:.1e}, trace-power rel err {worst_trace:.1e}, Lidskii 100/100 {}, two-state Y {:.3} (|z| {z_corr:.2}) naive {:.3} (|z| vs 1.25 {z_naive:.2}), worker drift {max_rel:.1e}",
            if lidskii { "ok" } else { "VIOLATED" },
            corrected.mean().unwrap(),
            naive.mean().unwrap()
        ),
    )
}

fn semicircle_sanity() -> Outcome {
    let n = 1000usize;
    let b = (n as f64).powf(0.7).round() as usize;
    let cfg = config(Command::Moments, &[("n", "1000"), ("b", &b.to_string()), ("k", "4"), ("trials", "200"), ("seed", "9")]);
    let t = cmd_moments(&cfg).unwrap();
    let (m, se) = (column(&t, "m_k")[0], column(&t, "stderr")[0]);
    let z_limit = z(m, 2.0, se);
    let exact = to_f64(&m4_sigma(n, b, true).unwrap());
    let z_exact = z(m, exact, se);
    let limit0 = m4_limit_curve(1e-12).unwrap();
    outcome(
        z_limit <= MAX_Z && (limit0 - 2.0).abs() < 1e-10,
        format!(
            "N={n}, b={b}: m4 = {m:.5} +- {se:.5}, |z| vs 2 = {z_limit:.1}; finite-N exact {exact:.5} (|z| = {z_exact:.2}); limit curve at c->0 = {limit0:.12}"
        ),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("block trace oracle suite", Duration::from_secs(60), block_trace_suite),
        ("E tr H^4 reconciliation", Duration::from_secs(120), tr_h4_reconciliation),
        ("critical-point asymptotics", Duration::from_secs(1), critical_asymptotics),
        ("limit-curve check", Duration::from_secs(1), limit_curve),
        ("fourth-moment curve (N = 100, 200)", Duration::from_secs(600), fourth_moment_curve),
        ("IPR slopes (N = 2000)", Duration::from_secs(1800), ipr_slopes),
        ("Y(Q) curve (N = 100, 200)", Duration::from_secs(1800), yq_curve),
        ("property suites", Duration::from_secs(300), property_suites),
        ("semicircle sanity", Duration::from_secs(300), semicircle_sanity),
    ];
    // ACCEPTANCE_ONLY=5,7 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "[{}] criterion {}: {name}: {} [{:.1}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", OVER BUDGET" }
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
