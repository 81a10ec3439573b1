use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pairs: usize,
    pub pearson_r: f64,
    pub spearman_rho: f64,
    /// Two-sided p-values of the t-test for zero correlation.
    pub pearson_p: f64,
    pub spearman_p: f64,
}

fn check(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::dim(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(Error::UndefinedStatistic(format!("{} pairs, need at least 3", xs.len())));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedStatistic("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation as the Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Two-sided p-value of `r` over `pairs` observations.
pub fn correlation_p_value(r: f64, pairs: usize) -> f64 {
    let df = pairs as f64 - 2.0;
    if df <= 0.0 {
        return f64::NAN;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    let pearson_r = pearson(xs, ys)?;
    let spearman_rho = spearman(xs, ys)?;
    Ok(Correlation {
        pairs: xs.len(),
        pearson_r,
        spearman_rho,
        pearson_p: correlation_p_value(pearson_r, xs.len()),
        spearman_p: correlation_p_value(spearman_rho, xs.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_perfect() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = correlate(&xs, &ys).unwrap();
        assert!((c.pearson_r - 1.0).abs() < 1e-12);
        assert!((c.spearman_rho - 1.0).abs() < 1e-12);
        assert_eq!(c.pearson_p, 0.0);
    }

    #[test]
    fn monotone_nonlinear() {
        let xs: Vec<f64> = (-5..=5).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -x * x * x).collect();
        let r = pearson(&xs, &ys).unwrap();
        assert!(r > -1.0 && r < 0.0);
        assert!((spearman(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedStatistic(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::UndefinedStatistic(_))));
        assert!(matches!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn p_value_reference() {
        // r = 0.5 over 12 pairs: t = 0.5 * sqrt(10 / 0.75) = 1.8257, df = 10
        let p = correlation_p_value(0.5, 12);
        assert!((p - 0.0979).abs() < 5e-4, "{p}");
        assert!((correlation_p_value(0.0, 30) - 1.0).abs() < 1e-12);
    }
}
