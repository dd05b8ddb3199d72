//! Acceptance criteria, one test each. Every test prints a single PASS/FAIL
//! line (written past the test harness capture) and then asserts.

use std::io::Write;

use localdepth::clustering::ClusterParams;
use localdepth::constants::{estimate_lambda1, ConstantsBudget};
use localdepth::depth::{depth_at, DepthConfig, SimplexBudget};
use localdepth::experiment::{count_local_maxima, plot_data, run_bench, smooth5, BenchConfig};
use localdepth::metrics::{probability_distance, ClusterSet};
use localdepth::models::density_by_name;
use localdepth::validate::{
    check_clt_variance, check_extreme_localization, check_level_sets, check_mode_bracket, check_symmetry_stationary,
    check_unbiasedness_and_variance, grid_1d, level_set_grid, mode_height,
};
use localdepth::{Family, GeometryConstants, RegionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const SEED: u64 = 1;

fn report(id: u32, name: &str, passed: bool, detail: &str) {
    let line = format!(
        "acceptance {id:02} {name}: {} ({detail})\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

/// Pairs `a <= x <= b` with `b - a <= tau`, over all pairs.
fn interval_pair_depth(data: &[f64], x: f64, tau: f64) -> f64 {
    let n = data.len();
    let mut count = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (data[i].min(data[j]), data[i].max(data[j]));
            if a <= x && x <= b && b - a <= tau {
                count += 1;
            }
        }
    }
    count as f64 / (n * (n - 1) / 2) as f64
}

#[test]
fn criterion_01_family_coincidence_on_the_line() {
    let families = [Family::Lens, Family::Spherical, Family::BetaSkeleton { beta: 1.5 }, Family::Simplicial];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut family_mismatch = 0;
    let mut oracle_mismatch = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = localdepth::Dataset::from_scalars(&xs).unwrap();
        for _ in 0..20 {
            let x = rng.random_range(-3.5..3.5);
            let tau = rng.random_range(0.0..4.0);
            let vals: Vec<f64> = families
                .iter()
                .map(|&f| {
                    let mut cfg = DepthConfig::new(RegionSpec::new(f, 1).unwrap(), tau);
                    cfg.simplex_budget = SimplexBudget::Exact;
                    depth_at(&data, &[x], &cfg).unwrap()
                })
                .collect();
            family_mismatch += usize::from(vals.iter().any(|&v| v != vals[0]));
            oracle_mismatch += usize::from((vals[0] - interval_pair_depth(&xs, x, tau)).abs() > 1e-15);
        }
    }
    let passed = family_mismatch == 0 && oracle_mismatch == 0;
    report(
        1,
        "p=1 family coincidence",
        passed,
        &format!("{family_mismatch} family and {oracle_mismatch} oracle mismatches over 2000 queries"),
    );
    assert!(passed);
}

#[test]
fn criterion_02_geometric_constants() {
    let line = RegionSpec::lens(1);
    let analytic = GeometryConstants::analytic(&line).unwrap();
    let budget = ConstantsBudget { lambda1_samples: 10_000_000, star_outer: 4000, star_inner: 10_000 };
    let est = GeometryConstants::estimate(&line, &budget, SEED).unwrap();
    let plane = RegionSpec::lens(2);
    let (a, _) = estimate_lambda1(&plane, 10_000_000, SEED).unwrap();
    let (b, _) = estimate_lambda1(&plane, 10_000_000, SEED + 1).unwrap();
    let l1_ok = (est.lambda1 - 1.0).abs() <= 3.0 * est.lambda1_se;
    let star_ok = (est.lambda1_star_sq - 2.0 / 3.0).abs() <= 3.0 * est.lambda1_star_sq_se;
    let cross = (a - b).abs() / (0.5 * (a + b));
    let passed = analytic.lambda1 == 1.0 && analytic.lambda1_star_sq == 2.0 / 3.0 && l1_ok && star_ok && cross <= 0.01;
    report(
        2,
        "geometric constants",
        passed,
        &format!(
            "lambda1 {:.5} +- {:.1e}, lambda1*^2 {:.5} +- {:.1e}, plane {a:.5} vs {b:.5}",
            est.lambda1, est.lambda1_se, est.lambda1_star_sq, est.lambda1_star_sq_se
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_03_unbiasedness_and_exact_variance() {
    let d = density_by_name("normal").unwrap();
    let v = check_unbiasedness_and_variance(&d, 0.0, 0.5, 50, 2000, SEED).unwrap();
    // Independent value: 2 int_{-tau}^{0} phi(a) (Phi(a + tau) - Phi(0)) da by Simpson.
    let nd = Normal::standard();
    let (tau, m) = (0.5, 2000);
    let h = tau / m as f64;
    let g = |a: f64| nd.pdf(a) * (nd.cdf(a + tau) - 0.5);
    let simpson = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * g(-tau + i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    let oracle_ok = (2.0 * simpson - v.details["population_lld"]).abs() < 1e-10;
    let passed = v.passed && oracle_ok;
    report(
        3,
        "unbiasedness and exact variance",
        passed,
        &format!(
            "mean {:.6} vs {:.6} (se {:.1e}), variance {:.4e} vs {:.4e} (tol {:.1e})",
            v.details["mean"], v.details["population_lld"], v.details["mean_se"], v.statistic, v.target, v.tolerance
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_04_clt_variance() {
    let d = density_by_name("uniform").unwrap();
    let c = GeometryConstants::analytic(&RegionSpec::lens(1)).unwrap();
    let v = check_clt_variance(&d, &[0.5], 2000, 0.25, 500, SEED, &c).unwrap();
    let within = (v.statistic - 1.0 / 6.0).abs() <= 0.25 / 6.0;
    let normal = v.details["ad_p_value"] > 0.001;
    let passed = within && normal;
    report(
        4,
        "CLT variance",
        passed,
        &format!(
            "variance {:.4} vs 1/6 +- 25%, Anderson-Darling p {:.3}",
            v.statistic, v.details["ad_p_value"]
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_05_extreme_localization() {
    let d = density_by_name("normal").unwrap();
    let v = check_extreme_localization(&d, &grid_1d(-3.0, 3.0, 50), &[0.4, 0.2, 0.1], 5000, 0.1, SEED).unwrap();
    let decreasing = v.ladder.windows(2).all(|w| w[1] < w[0]);
    let passed = decreasing && v.statistic < 0.1;
    report(
        5,
        "extreme localization",
        passed,
        &format!("sup errors {:?}, strictly decreasing {decreasing}, final < 0.1 {}", v.ladder, v.statistic < 0.1),
    );
    assert!(passed);
}

#[test]
fn criterion_06_symmetry_and_mode_bracket() {
    let d = density_by_name("bimodal-1d").unwrap();
    let m = d.as_mixture().unwrap();
    assert_eq!(m.means(), &[vec![-2.0], vec![2.0]]);
    let sym = check_symmetry_stationary(&d, 1.0, SEED).unwrap();
    let bracket = check_mode_bracket(&d, &[1.0, 0.5, 0.25], SEED).unwrap();
    let passed = sym.statistic < 1e-6 && bracket.statistic < 1.0;
    report(
        6,
        "symmetry stationarity and mode bracket",
        passed,
        &format!("|f_tau'(0)| {:.1e}, max |m_tau - m| / tau {:.4}", sym.statistic, bracket.statistic),
    );
    assert!(passed);
}

/// Exact-count replications and mean Hausdorff error of an LLD bench.
fn bench(density: &str, p: usize, n: usize, reps: usize, q: f64, s: usize) -> (usize, f64) {
    let params = ClusterParams::new(RegionSpec::lens(p)).with_qsr(q, s, 0.05);
    let res = run_bench(&BenchConfig::new(density, n, reps, params, SEED)).unwrap();
    (res.row.report.counts.exact, res.row.report.hausdorff.mean)
}

#[test]
fn criterion_07_bimodal_clustering() {
    let (exact, h) = bench("bimodal", 2, 500, 20, 0.1, 50);
    let passed = exact >= 18 && h <= 0.05;
    report(7, "bimodal clustering", passed, &format!("exact count {exact}/20, mean Hausdorff {h:.4}"));
    assert!(passed);
}

#[test]
fn criterion_08_fountain_clustering() {
    let (exact, h) = bench("fountain10", 2, 1000, 10, 0.1, 30);
    let passed = exact >= 9 && h <= 0.10;
    report(8, "fountain clustering", passed, &format!("exact count {exact}/10, mean Hausdorff {h:.4}"));
    assert!(passed);
}

#[test]
fn criterion_09_mult_quadrimodal_clustering() {
    let (exact, h) = bench("mult-quadrimodal", 5, 500, 10, 0.1, 50);
    let passed = exact >= 8;
    report(9, "five-dimensional quadrimodal clustering", passed, &format!("exact count {exact}/10, mean Hausdorff {h:.4}"));
    assert!(passed);
}

/// Minimum over injections of the smaller family into the larger, by
/// enumerating permutations of the larger family's indices.
fn brute_probability_distance(c: &[Vec<usize>], d: &[Vec<usize>], n: usize, eta: f64) -> f64 {
    let (small, large) = if c.len() <= d.len() { (c, d) } else { (d, c) };
    let sym = |a: &Vec<usize>, b: &Vec<usize>| {
        let only_a = a.iter().filter(|v| !b.contains(v)).count();
        let only_b = b.iter().filter(|v| !a.contains(v)).count();
        (only_a + only_b) as f64
    };
    let mut idx: Vec<usize> = (0..large.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut idx, 0, &mut |perm| {
        let matched: f64 = small.iter().enumerate().map(|(i, b)| sym(b, &large[perm[i]])).sum();
        let unmatched: f64 = perm[small.len()..].iter().map(|&j| large[j].len() as f64).sum();
        best = best.min(matched + eta * unmatched);
    });
    best / (2.0 * n as f64)
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

#[test]
fn criterion_10_metrics_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=30);
        let mut part = || {
            let k = rng.random_range(1..=6usize.min(n));
            let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
            ClusterSet::from_labels(&labels)
        };
        let (c, d) = (part(), part());
        for eta in [0.0, 0.5, 1.0, 2.0] {
            let lib = probability_distance(&c, &d, eta).unwrap();
            let oracle = brute_probability_distance(c.blocks(), d.blocks(), n, eta);
            mismatches += usize::from(lib != oracle);
        }
    }
    let whole = ClusterSet::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
    let halves = ClusterSet::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
    let worked = probability_distance(&whole, &halves, 1.0).unwrap() == 0.5
        && probability_distance(&whole, &halves, 0.0).unwrap() == 0.25;
    let passed = mismatches == 0 && worked;
    report(10, "metrics oracle equivalence", passed, &format!("{mismatches} mismatches over 2000 comparisons, worked examples {worked}"));
    assert!(passed);
}

#[test]
fn criterion_11_level_set_convergence() {
    let d = density_by_name("bimodal").unwrap();
    let alpha = 0.5 * mode_height(&d).unwrap();
    let v = check_level_sets(&d, alpha, &[(0.5, 500), (0.25, 2000)], &level_set_grid(), SEED).unwrap();
    let increasing = v.ladder.windows(2).all(|w| w[1] >= w[0]);
    let passed = increasing && v.statistic >= 0.95;
    report(11, "level-set convergence", passed, &format!("agreement ladder {:?}, alpha {alpha:.5}", v.ladder));
    assert!(passed);
}

#[test]
fn criterion_12_quadrimodal_figure_modes() {
    let d = density_by_name("quadrimodal-1d").unwrap();
    let data = d.sample(6000, SEED).unwrap();
    let table = plot_data(&data, &grid_1d(-4.0, 6.0, 201), &[1.0, 4.0], None, SEED).unwrap();
    let maxima = |c: usize| count_local_maxima(&smooth5(&table.rows.iter().map(|r| r[c]).collect::<Vec<_>>()));
    let (at1, at4) = (maxima(1), maxima(2));
    let passed = at1 == 3 && at4 == 1;
    report(12, "quadrimodal figure modes", passed, &format!("{at1} maxima at tau = 1, {at4} at tau = 4"));
    assert!(passed);
}
