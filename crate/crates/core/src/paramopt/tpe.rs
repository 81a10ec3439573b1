//! Tree-structured Parzen estimator with independent per-dimension models.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;
use statrs::function::erf::erf;

use super::{flatten, SearchSpace, Trial};
use crate::circuit::QaoaParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Fraction of the history treated as "good".
    pub gamma_split: f64,
    /// Uniform suggestions until the history reaches this length.
    pub n_startup: usize,
    /// Candidates drawn from the good model per suggestion.
    pub candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            gamma_split: 0.25,
            n_startup: 10,
            candidates: 24,
        }
    }
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Mixture of Gaussians truncated to `[lo, hi]`: one kernel per observation
/// plus a prior kernel of width `hi - lo` at the midpoint.
struct Parzen {
    lo: f64,
    hi: f64,
    centers: Vec<f64>,
    bandwidths: Vec<f64>,
    /// Per-kernel truncation normaliser.
    mass: Vec<f64>,
}

impl Parzen {
    fn fit(values: &[f64], lo: f64, hi: f64) -> Self {
        let width = hi - lo;
        let m = values.len() as f64;
        let bandwidth = if values.len() < 2 {
            0.1 * width
        } else {
            let mean = values.iter().sum::<f64>() / m;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            // Silverman's rule, floored at width / min(100, m + 1) so a clustered
            // good set keeps exploring
            (1.06 * var.sqrt() * m.powf(-0.2)).max(width / (m + 1.0).min(100.0))
        };
        let mut centers = values.to_vec();
        let mut bandwidths = vec![bandwidth; values.len()];
        centers.push(0.5 * (lo + hi));
        bandwidths.push(width);
        let mass = centers
            .iter()
            .zip(&bandwidths)
            .map(|(&c, &h)| normal_cdf((hi - c) / h) - normal_cdf((lo - c) / h))
            .collect();
        Parzen {
            lo,
            hi,
            centers,
            bandwidths,
            mass,
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        let sum: f64 = self
            .centers
            .iter()
            .zip(&self.bandwidths)
            .zip(&self.mass)
            .map(|((&c, &h), &z)| (-0.5 * ((x - c) / h).powi(2)).exp() / (h * SQRT_2PI * z.max(1e-300)))
            .sum();
        (sum / self.centers.len() as f64).max(1e-300).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = rng.gen_range(0..self.centers.len());
        let c = self.centers[k];
        let kernel = Normal::new(c, self.bandwidths[k]).expect("positive bandwidth");
        for _ in 0..64 {
            let x = rng.sample(kernel);
            if (self.lo..=self.hi).contains(&x) {
                return x;
            }
        }
        c.clamp(self.lo, self.hi)
    }
}

/// Smoothed frequency model over the ordering category.
struct Categorical {
    weights: Vec<f64>,
}

impl Categorical {
    fn fit(choices: &[usize], values: &[usize]) -> Self {
        let k = choices.len() as f64;
        let total = values.len() as f64;
        let weights = choices
            .iter()
            .map(|c| (values.iter().filter(|v| *v == c).count() as f64 + 1.0) / (total + k))
            .collect();
        Categorical { weights }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r = rng.gen::<f64>() * self.weights.iter().sum::<f64>();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if r < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

/// Splits the history into good and bad trials.
///
/// The good set is the best `ceil(gamma_split * N)` trials, except that a
/// run of equal objectives straddling the cut is moved to the bad set. An
/// empty good set means the history carries no ranking information.
fn split(history: &[Trial], gamma_split: f64) -> (Vec<&Trial>, Vec<&Trial>) {
    let mut sorted: Vec<&Trial> = history.iter().collect();
    sorted.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.trial_index.cmp(&b.trial_index)));
    let n = sorted.len();
    let mut k = ((gamma_split * n as f64).ceil() as usize).clamp(1, n);
    if k < n {
        let boundary = sorted[k].objective;
        while k > 0 && sorted[k - 1].objective == boundary {
            k -= 1;
        }
    }
    let bad = sorted.split_off(k);
    (sorted, bad)
}

/// Next `(params, ordering_id)` to evaluate.
///
/// Uniform until `n_startup` trials exist (or when the history has no usable
/// ranking); afterwards the candidate maximising `l(x) / g(x)` among
/// `candidates` draws from the good model.
pub fn tpe_suggest<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    cfg: &TpeConfig,
    rng: &mut R,
) -> (QaoaParams, usize) {
    if history.len() < cfg.n_startup.max(1) {
        return space.uniform(rng);
    }
    let (good, bad) = split(history, cfg.gamma_split);
    if good.is_empty() {
        return space.uniform(rng);
    }

    let dims = space.dims();
    let good_pts: Vec<Vec<f64>> = good.iter().map(|t| flatten(&t.params)).collect();
    let bad_pts: Vec<Vec<f64>> = bad.iter().map(|t| flatten(&t.params)).collect();
    let models: Vec<Option<(Parzen, Parzen)>> = (0..dims)
        .map(|d| {
            let (lo, hi) = space.range(d);
            if hi <= lo {
                return None;
            }
            let g: Vec<f64> = good_pts.iter().map(|p| p[d]).collect();
            let b: Vec<f64> = bad_pts.iter().map(|p| p[d]).collect();
            Some((Parzen::fit(&g, lo, hi), Parzen::fit(&b, lo, hi)))
        })
        .collect();

    let slot = |o: usize| space.orderings.iter().position(|&x| x == o);
    let good_cat: Vec<usize> = good.iter().filter_map(|t| slot(t.ordering_id)).collect();
    let bad_cat: Vec<usize> = bad.iter().filter_map(|t| slot(t.ordering_id)).collect();
    let cat_good = Categorical::fit(&space.orderings, &good_cat);
    let cat_bad = Categorical::fit(&space.orderings, &bad_cat);

    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for _ in 0..cfg.candidates.max(1) {
        let mut score = 0.0;
        let values: Vec<f64> = (0..dims)
            .map(|d| match &models[d] {
                None => space.range(d).0,
                Some((l, g)) => {
                    let x = l.sample(rng);
                    score += l.log_density(x) - g.log_density(x);
                    x
                }
            })
            .collect();
        let c = cat_good.sample(rng);
        score += cat_good.weights[c].ln() - cat_bad.weights[c].ln();
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, values, c));
        }
    }
    let (_, values, c) = best.expect("at least one candidate");
    (space.params_from(&values), space.orderings[c])
}
