//! Black-box search over QAOA angles and the gate-ordering category.

mod tpe;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use tpe::{tpe_suggest, TpeConfig};

use crate::circuit::QaoaParams;
use crate::error::{Error, Result};
use crate::ising::EnergyRecord;
use crate::seed;
use crate::simulator::SampleBatch;

/// Every trial's first suggestion: all angles set to this value.
pub const START_ANGLE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub p: usize,
    pub gamma_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Allowed gate-ordering ids.
    pub orderings: Vec<usize>,
}

impl SearchSpace {
    /// `γ ∈ [-π/2, π/2]`, `β ∈ [-π/4, π/4]`, orderings `0..num_orderings`.
    pub fn standard(p: usize, num_orderings: usize) -> Self {
        SearchSpace {
            p,
            gamma_range: (-FRAC_PI_2, FRAC_PI_2),
            beta_range: (-FRAC_PI_4, FRAC_PI_4),
            orderings: (0..num_orderings).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("search space needs p >= 1".into()));
        }
        for (name, (lo, hi)) in [("gamma", self.gamma_range), ("beta", self.beta_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("empty {name} interval [{lo}, {hi}]")));
            }
        }
        if self.orderings.is_empty() {
            return Err(Error::Config("search space needs at least one ordering".into()));
        }
        Ok(())
    }

    /// Number of continuous dimensions (`2p`).
    pub fn dims(&self) -> usize {
        2 * self.p
    }

    pub(crate) fn range(&self, dim: usize) -> (f64, f64) {
        if dim < self.p {
            self.gamma_range
        } else {
            self.beta_range
        }
    }

    pub(crate) fn params_from(&self, values: &[f64]) -> QaoaParams {
        QaoaParams {
            gammas: values[..self.p].to_vec(),
            betas: values[self.p..].to_vec(),
        }
    }

    pub fn contains(&self, params: &QaoaParams, ordering_id: usize) -> bool {
        params.p() == self.p
            && flatten(params)
                .iter()
                .enumerate()
                .all(|(d, &v)| {
                    let (lo, hi) = self.range(d);
                    (lo..=hi).contains(&v)
                })
            && self.orderings.contains(&ordering_id)
    }

    fn start_point(&self) -> (QaoaParams, usize) {
        let values: Vec<f64> = (0..self.dims())
            .map(|d| {
                let (lo, hi) = self.range(d);
                START_ANGLE.clamp(lo, hi)
            })
            .collect();
        (self.params_from(&values), self.orderings[0])
    }

    pub(crate) fn uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> (QaoaParams, usize) {
        let values: Vec<f64> = (0..self.dims())
            .map(|d| {
                let (lo, hi) = self.range(d);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect();
        let o = self.orderings[rng.gen_range(0..self.orderings.len())];
        (self.params_from(&values), o)
    }
}

pub(crate) fn flatten(params: &QaoaParams) -> Vec<f64> {
    params.gammas.iter().chain(&params.betas).copied().collect()
}

/// Result of one objective evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// The minimised quantity (mean energy for QAOA objectives).
    pub mean: f64,
    pub min: f64,
    pub best: Option<EnergyRecord>,
    pub batch: Option<SampleBatch>,
}

impl Evaluation {
    /// An evaluation of a plain scalar function.
    pub fn scalar(value: f64) -> Self {
        Evaluation {
            mean: value,
            min: value,
            best: None,
            batch: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: usize,
    pub params: QaoaParams,
    pub ordering_id: usize,
    /// Mean energy of the trial's batch.
    pub objective: f64,
    pub min_energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_in_trial: Option<EnergyRecord>,
    #[serde(skip)]
    pub batch: Option<SampleBatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Grid { points_per_dim: usize },
    Tpe(TpeConfig),
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Tpe(TpeConfig::default())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "grid" => Ok(Strategy::Grid { points_per_dim: 5 }),
            "tpe" => Ok(Strategy::Tpe(TpeConfig::default())),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

pub fn run_search<F>(objective: F, space: &SearchSpace, trials: usize, strategy: &Strategy, seed: u64) -> Result<Vec<Trial>>
where
    F: FnMut(&QaoaParams, usize) -> Result<Evaluation>,
{
    run_search_observed(objective, space, trials, strategy, seed, |_| Ok(()))
}

/// Runs exactly `trials` objective evaluations and reports each completed
/// trial to `observe` before the next suggestion is made.
///
/// Trial 0 is always the fixed start point (all angles `0.1`, clamped into
/// the space, first ordering). Objective errors are returned wrapped with
/// the failing trial index.
pub fn run_search_observed<F, O>(
    mut objective: F,
    space: &SearchSpace,
    trials: usize,
    strategy: &Strategy,
    seed: u64,
    mut observe: O,
) -> Result<Vec<Trial>>
where
    F: FnMut(&QaoaParams, usize) -> Result<Evaluation>,
    O: FnMut(&Trial) -> Result<()>,
{
    space.validate()?;
    if trials == 0 {
        return Err(Error::Config("search needs at least one trial".into()));
    }
    if let Strategy::Grid { points_per_dim: 0 } = strategy {
        return Err(Error::Config("grid needs at least one point per dimension".into()));
    }
    let mut rng = seed::rng(seed);
    let mut history: Vec<Trial> = Vec::with_capacity(trials);
    for t in 0..trials {
        let (params, ordering_id) = if t == 0 {
            space.start_point()
        } else {
            match strategy {
                Strategy::Random => space.uniform(&mut rng),
                Strategy::Grid { points_per_dim } => grid_point(space, *points_per_dim, t - 1),
                Strategy::Tpe(cfg) => tpe_suggest(&history, space, cfg, &mut rng),
            }
        };
        let eval = objective(&params, ordering_id).map_err(|e| Error::Objective {
            trial: t,
            source: Box::new(e),
        })?;
        let trial = Trial {
            trial_index: t,
            params,
            ordering_id,
            objective: eval.mean,
            min_energy: eval.min,
            best_in_trial: eval.best,
            batch: eval.batch,
        };
        observe(&trial)?;
        history.push(trial);
    }
    Ok(history)
}

fn grid_point(space: &SearchSpace, g: usize, k: usize) -> (QaoaParams, usize) {
    let dims = space.dims();
    let per_ordering = g.pow(dims as u32);
    let total = per_ordering * space.orderings.len();
    let mut k = k % total;
    let ordering = space.orderings[k / per_ordering];
    k %= per_ordering;
    let mut values = vec![0.0; dims];
    for (d, v) in values.iter_mut().enumerate() {
        let idx = k % g;
        k /= g;
        let (lo, hi) = space.range(d);
        *v = if g == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * idx as f64 / (g - 1) as f64
        };
    }
    (space.params_from(&values), ordering)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Mean,
    Min,
}

/// Trial with the lowest mean (or minimum) energy; ties go to the lower index.
pub fn best_trial(trials: &[Trial], criterion: Criterion) -> Result<&Trial> {
    let key = |t: &Trial| match criterion {
        Criterion::Mean => t.objective,
        Criterion::Min => t.min_energy,
    };
    let mut it = trials.iter();
    let first = it.next().ok_or(Error::EmptyInput("trial list"))?;
    Ok(it.fold(first, |best, t| if key(t) < key(best) { t } else { best }))
}

pub fn trials_csv_header(p: usize) -> String {
    let mut cols = vec!["trial".to_string()];
    cols.extend((0..p).map(|l| format!("gamma_{l}")));
    cols.extend((0..p).map(|l| format!("beta_{l}")));
    cols.extend(["ordering", "mean", "min"].map(String::from));
    cols.join(",")
}

pub fn trials_csv_row(t: &Trial) -> String {
    let mut row = t.trial_index.to_string();
    for v in flatten(&t.params) {
        let _ = write!(row, ",{v}");
    }
    let _ = write!(row, ",{},{},{}", t.ordering_id, t.objective, t.min_energy);
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        SearchSpace::standard(1, 3)
    }

    #[test]
    fn single_trial_is_start_point() {
        let out = run_search(
            |p, _| Ok(Evaluation::scalar(p.gammas[0])),
            &space(),
            1,
            &Strategy::default(),
            0,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].params, QaoaParams::constant(1, 0.1));
        assert_eq!(out[0].ordering_id, 0);
    }

    #[test]
    fn one_point_grid_repeats() {
        let s = SearchSpace {
            p: 1,
            gamma_range: (0.3, 0.3),
            beta_range: (-0.2, -0.2),
            orderings: vec![4],
        };
        let out = run_search(|_, _| Ok(Evaluation::scalar(1.0)), &s, 6, &Strategy::Grid { points_per_dim: 1 }, 0).unwrap();
        assert_eq!(out.len(), 6);
        for t in &out {
            assert_eq!(t.params, out[0].params);
            assert_eq!(t.ordering_id, 4);
        }
        assert_eq!(out[0].params.gammas, vec![0.3]);
    }

    #[test]
    fn grid_covers_points() {
        let s = SearchSpace {
            p: 1,
            gamma_range: (0.0, 1.0),
            beta_range: (0.0, 1.0),
            orderings: vec![0],
        };
        let out = run_search(|_, _| Ok(Evaluation::scalar(0.0)), &s, 10, &Strategy::Grid { points_per_dim: 3 }, 0).unwrap();
        let pts: Vec<(f64, f64)> = out[1..].iter().map(|t| (t.params.gammas[0], t.params.betas[0])).collect();
        assert_eq!(pts[0], (0.0, 0.0));
        assert_eq!(pts[1], (0.5, 0.0));
        assert_eq!(pts[8], (1.0, 1.0));
    }

    #[test]
    fn objective_error_carries_trial_index() {
        let mut calls = 0;
        let err = run_search(
            |_, _| {
                calls += 1;
                if calls == 3 {
                    Err(Error::Capacity("boom".into()))
                } else {
                    Ok(Evaluation::scalar(0.0))
                }
            },
            &space(),
            5,
            &Strategy::Random,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Objective { trial: 2, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn best_trial_rules() {
        let mk = |i: usize, mean: f64, min: f64| Trial {
            trial_index: i,
            params: QaoaParams::constant(1, 0.1),
            ordering_id: 0,
            objective: mean,
            min_energy: min,
            best_in_trial: None,
            batch: None,
        };
        let one = vec![mk(0, 1.0, 0.0)];
        assert_eq!(best_trial(&one, Criterion::Mean).unwrap().trial_index, 0);
        let tie = vec![mk(0, 2.0, 0.0), mk(1, 1.0, 0.0), mk(2, 1.0, -5.0)];
        assert_eq!(best_trial(&tie, Criterion::Mean).unwrap().trial_index, 1);
        assert_eq!(best_trial(&tie, Criterion::Min).unwrap().trial_index, 2);
        assert!(matches!(best_trial(&[], Criterion::Mean), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn invalid_spaces() {
        let mut s = space();
        s.orderings.clear();
        assert!(s.validate().is_err());
        let mut s = space();
        s.gamma_range = (1.0, 0.0);
        assert!(s.validate().is_err());
        assert!(run_search(|_, _| Ok(Evaluation::scalar(0.0)), &space(), 0, &Strategy::Random, 0).is_err());
    }

    #[test]
    fn csv_rows() {
        let t = Trial {
            trial_index: 3,
            params: QaoaParams::new(vec![0.5, 0.25], vec![-0.125, 0.0]).unwrap(),
            ordering_id: 2,
            objective: -1.5,
            min_energy: -4.0,
            best_in_trial: None,
            batch: None,
        };
        assert_eq!(trials_csv_header(2), "trial,gamma_0,gamma_1,beta_0,beta_1,ordering,mean,min");
        assert_eq!(trials_csv_row(&t), "3,0.5,0.25,-0.125,0,2,-1.5,-4");
    }
}
