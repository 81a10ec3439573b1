//! Correlation statistics against textbook formulas.

use ndar::harness::stats::{correlate, correlation_p_value};
use rand::Rng;

/// r = (n Σxy − Σx Σy) / sqrt((n Σx² − (Σx)²)(n Σy² − (Σy)²))
fn direct_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Rank of each value by counting: 1 + #smaller + (#equal - 1) / 2.
fn counting_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

#[test]
fn matches_direct_formulas_on_seeded_data() {
    let mut rng = ndar::seed::rng(2024);
    let xs: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // rounded to create ties for the rank statistic
    let ys: Vec<f64> = xs.iter().map(|x| ((0.6 * x + 0.4 * rng.gen_range(-1.0..1.0)) * 20.0).round() / 20.0).collect();
    let c = correlate(&xs, &ys).unwrap();
    assert_eq!(c.pairs, 100);
    assert!((c.pearson_r - direct_pearson(&xs, &ys)).abs() < 1e-12);
    let rho = direct_pearson(&counting_ranks(&xs), &counting_ranks(&ys));
    assert!((c.spearman_rho - rho).abs() < 1e-12);
    assert!(c.pearson_r > 0.5 && c.pearson_p < 1e-6);
}

#[test]
fn p_value_matches_tabulated_critical_values() {
    // two-sided 5% critical values of r: 0.4438 at 20 pairs, 0.1966 at 100 pairs
    assert!((correlation_p_value(0.4438, 20) - 0.05).abs() < 5e-4);
    assert!((correlation_p_value(0.1966, 100) - 0.05).abs() < 5e-4);
    assert!(correlation_p_value(-0.4438, 20) > 0.049);
}
