use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::stats::{correlate, Correlation};
use crate::error::{Error, Result};
use crate::ising::{approximation_ratio, IsingHamiltonian};
use crate::paramopt::{best_trial, Criterion, Trial};
use crate::remap::{run_ndar, NdarTrace, QaoaOptimizer, TerminationRule, AR_BINS};
use crate::simulator::sorted_quantile_mean;
use crate::solvers::{brute_force, random_bitstring, random_sampling, DEFAULT_BRUTE_FORCE_CAP};
use crate::{seed, Bitstring};

const TAG_GAUGE: u64 = 10;
const TAG_OPTIMIZER: u64 = 11;
const TAG_NDAR: u64 = 12;
const TAG_QAOA: u64 = 13;
const TAG_RANDOM: u64 = 14;

/// An instance with its exact or supplied ground energy.
#[derive(Clone, Debug)]
pub struct Instance {
    pub index: usize,
    pub hamiltonian: IsingHamiltonian,
    pub ground_energy: f64,
}

pub fn prepare_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let hs = cfg.load_instances()?;
    hs.into_par_iter()
        .enumerate()
        .map(|(index, h)| {
            let ground_energy = match cfg.ground_energies.get(index) {
                Some(&e) => e,
                None if h.n() <= DEFAULT_BRUTE_FORCE_CAP => brute_force(&h)?.energy,
                None => {
                    return Err(Error::Config(format!(
                        "instance {index} has {} spins and no known ground energy; run `ndar solve-exact` \
                         (or another solver) and list the result under ground_energies",
                        h.n()
                    )))
                }
            };
            if ground_energy >= 0.0 {
                return Err(Error::InvalidReference(ground_energy));
            }
            Ok(Instance {
                index,
                hamiltonian: h,
                ground_energy,
            })
        })
        .collect()
}

pub(crate) fn optimizer(cfg: &ExperimentConfig, n: usize, trials: usize, orderings: usize, seed: u64) -> Result<QaoaOptimizer> {
    let space = cfg.search_space(1)?;
    Ok(QaoaOptimizer {
        backend: cfg.backend,
        noise: cfg.noise_for(n)?,
        strategy: cfg.strategy()?,
        p: cfg.p,
        trials,
        shots: cfg.shots,
        orderings,
        gamma_range: space.gamma_range,
        beta_range: space.beta_range,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub instance: usize,
    pub gauge: usize,
    pub gauge_mask: Bitstring,
    pub attractor_ar: f64,
    pub best_trial: usize,
    pub shots: usize,
    /// Mean approximation ratio of the best `q` fraction of the best trial's samples.
    pub quantile_ars: Vec<f64>,
    /// Standard error of the full-batch mean approximation ratio.
    pub mean_ar_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileCorrelation {
    pub quantile: f64,
    pub stats: Option<Correlation>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CorrelationResult {
    pub quantiles: Vec<f64>,
    pub rows: Vec<CorrelationRow>,
    pub correlations: Vec<QuantileCorrelation>,
    pub trials: Vec<(usize, usize, Trial)>,
}

/// Per instance, optimizes `gauges` random gauges of the problem with one
/// shared optimizer seed and relates each gauge's attractor approximation
/// ratio to the achieved quantile approximation ratios.
pub fn correlation_study(cfg: &ExperimentConfig) -> Result<CorrelationResult> {
    let instances = prepare_instances(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.gauges).map(move |g| (i, g)))
        .collect();
    let results: Vec<(CorrelationRow, Vec<Trial>)> = jobs
        .par_iter()
        .map(|&(i, g)| correlation_job(cfg, &instances[i], g))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut trials = Vec::new();
    for (row, ts) in results {
        trials.extend(ts.into_iter().map(|t| (row.instance, row.gauge, t)));
        rows.push(row);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.attractor_ar).collect();
    let correlations = cfg
        .quantiles
        .iter()
        .enumerate()
        .map(|(k, &quantile)| {
            let ys: Vec<f64> = rows.iter().map(|r| r.quantile_ars[k]).collect();
            match correlate(&xs, &ys) {
                Ok(stats) => QuantileCorrelation {
                    quantile,
                    stats: Some(stats),
                    error: None,
                },
                Err(e) => QuantileCorrelation {
                    quantile,
                    stats: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(CorrelationResult {
        quantiles: cfg.quantiles.clone(),
        rows,
        correlations,
        trials,
    })
}

fn correlation_job(cfg: &ExperimentConfig, inst: &Instance, gauge: usize) -> Result<(CorrelationRow, Vec<Trial>)> {
    let h = &inst.hamiltonian;
    let n = h.n();
    let y = random_bitstring(&mut seed::rng(cfg.job_seed(&[inst.index as u64, TAG_GAUGE, gauge as u64])), n);
    let hy = h.gauge_transform(&y)?;
    let opt = optimizer(cfg, n, cfg.trials, cfg.orderings, cfg.job_seed(&[inst.index as u64, TAG_OPTIMIZER]))?;
    let attractor_ar = approximation_ratio(hy.energy(&opt.noise.attractor)?, inst.ground_energy)?;
    let (trials, samples) = opt.search(&hy, 0)?;
    let best = best_trial(&trials, Criterion::Mean)?.trial_index;
    let batch = &samples[best * cfg.shots..(best + 1) * cfg.shots];
    let mut energies = batch.iter().map(|x| hy.energy(x)).collect::<Result<Vec<f64>>>()?;
    energies.sort_by(f64::total_cmp);
    let quantile_ars = cfg
        .quantiles
        .iter()
        .map(|&q| approximation_ratio(sorted_quantile_mean(&energies, q)?, inst.ground_energy))
        .collect::<Result<_>>()?;
    let m = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / m;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let stderr = (var / m).sqrt() / inst.ground_energy.abs();
    Ok((
        CorrelationRow {
            instance: inst.index,
            gauge,
            gauge_mask: y,
            attractor_ar,
            best_trial: best,
            shots: cfg.shots,
            quantile_ars,
            mean_ar_stderr: stderr,
        },
        trials,
    ))
}

/// Per-instance spread of the full-batch mean approximation ratio across
/// gauges: `(instance, std across gauges, pooled standard error)`.
pub fn gauge_spread(result: &CorrelationResult) -> Vec<(usize, f64, f64)> {
    let Some(full) = result.quantiles.iter().position(|&q| q == 1.0) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut instances: Vec<usize> = result.rows.iter().map(|r| r.instance).collect();
    instances.dedup();
    for i in instances {
        let rows: Vec<&CorrelationRow> = result.rows.iter().filter(|r| r.instance == i).collect();
        let k = rows.len() as f64;
        let mean = rows.iter().map(|r| r.quantile_ars[full]).sum::<f64>() / k;
        let std = (rows.iter().map(|r| (r.quantile_ars[full] - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
        let pooled = (rows.iter().map(|r| r.mean_ar_stderr.powi(2)).sum::<f64>() / k).sqrt();
        out.push((i, std, pooled));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub instance: usize,
    pub iteration: usize,
    /// Samples consumed by each arm up to this point.
    pub samples: usize,
    pub ndar_best_ar: f64,
    pub qaoa_best_ar: f64,
    pub random_best_ar: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceResult {
    pub rows: Vec<ConvergenceRow>,
    pub traces: Vec<NdarTrace>,
    /// Trials of the single-frame QAOA arm per instance.
    pub qaoa_trials: Vec<Vec<Trial>>,
}

/// Runs NDAR on every instance with the configured rules.
pub fn ndar_runs(cfg: &ExperimentConfig, instances: &[Instance]) -> Result<Vec<NdarTrace>> {
    instances.par_iter().map(|inst| ndar_job(cfg, inst, None)).collect()
}

fn ndar_job(cfg: &ExperimentConfig, inst: &Instance, rules: Option<Vec<TerminationRule>>) -> Result<NdarTrace> {
    let h = &inst.hamiltonian;
    let mut ncfg = cfg.ndar_config(h.n())?;
    if let Some(rules) = rules {
        ncfg.termination = rules;
    }
    let mut opt = optimizer(cfg, h.n(), cfg.trials, cfg.orderings, cfg.job_seed(&[inst.index as u64, TAG_NDAR]))?;
    Ok(run_ndar(h, &mut opt, &ncfg, Some(inst.ground_energy))?)
}

/// NDAR against single-frame QAOA and uniform sampling at equal sample
/// budgets `M * (i + 1)` for `i < max_iters`.
///
/// NDAR runs the full `max_iters` iterations here so that every arm reports
/// the same budget grid.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceResult> {
    let instances = prepare_instances(cfg)?;
    let m = cfg.trials * cfg.shots;
    let per_instance: Vec<(Vec<ConvergenceRow>, NdarTrace, Vec<Trial>)> = instances
        .par_iter()
        .map(|inst| -> Result<_> {
            let h = &inst.hamiltonian;
            let egs = inst.ground_energy;
            let trace = ndar_job(cfg, inst, Some(vec![TerminationRule::MaxIters]))?;

            let qaoa = optimizer(
                cfg,
                h.n(),
                cfg.trials * cfg.max_iters,
                cfg.orderings * cfg.max_iters,
                cfg.job_seed(&[inst.index as u64, TAG_QAOA]),
            )?;
            let (qaoa_trials, _) = qaoa.search(h, 0)?;
            let random = random_sampling(h, m * cfg.max_iters, cfg.job_seed(&[inst.index as u64, TAG_RANDOM]))?;

            let mut rows = Vec::with_capacity(cfg.max_iters);
            let (mut qaoa_best, mut random_best) = (f64::INFINITY, f64::INFINITY);
            for (i, r) in trace.records.iter().enumerate() {
                let budget = m * (i + 1);
                let qaoa_slice = &qaoa_trials[i * cfg.trials..(i + 1) * cfg.trials];
                qaoa_best = qaoa_slice.iter().map(|t| t.min_energy).fold(qaoa_best, f64::min);
                random_best = random[i * m..(i + 1) * m].iter().map(|e| e.energy).fold(random_best, f64::min);
                let qaoa_samples = (i + 1) * cfg.trials * cfg.shots;
                let random_samples = (i + 1) * m;
                if r.samples_consumed != budget || qaoa_samples != budget || random_samples != budget {
                    return Err(Error::Invariant(format!(
                        "budget mismatch at iteration {i}: ndar {}, qaoa {qaoa_samples}, random {random_samples}",
                        r.samples_consumed
                    )));
                }
                rows.push(ConvergenceRow {
                    instance: inst.index,
                    iteration: i,
                    samples: budget,
                    ndar_best_ar: approximation_ratio(r.best_so_far, egs)?,
                    qaoa_best_ar: approximation_ratio(qaoa_best, egs)?,
                    random_best_ar: approximation_ratio(random_best, egs)?,
                });
            }
            Ok((rows, trace, qaoa_trials))
        })
        .collect::<Result<_>>()?;

    let mut result = ConvergenceResult {
        rows: Vec::new(),
        traces: Vec::new(),
        qaoa_trials: Vec::new(),
    };
    for (rows, trace, trials) in per_instance {
        result.rows.extend(rows);
        result.traces.push(trace);
        result.qaoa_trials.push(trials);
    }
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKind {
    Ar,
    RawHw,
    EffectiveHw,
}

impl HistogramKind {
    pub fn name(self) -> &'static str {
        match self {
            HistogramKind::Ar => "ar",
            HistogramKind::RawHw => "raw_hw",
            HistogramKind::EffectiveHw => "effective_hw",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub instance: usize,
    pub iteration: usize,
    pub kind: HistogramKind,
    /// Hamming weight, or the lower edge of an approximation-ratio bin.
    pub bin: f64,
    pub count: usize,
    pub fraction: f64,
}

/// Normalised per-iteration histograms of one trace with stored samples.
pub fn trace_histograms(instance: usize, trace: &NdarTrace) -> Result<Vec<HistogramRow>> {
    let mut rows = Vec::new();
    for r in &trace.records {
        let samples = r.samples.as_ref().ok_or_else(|| {
            Error::Config("trace has no stored samples; rerun with keep_samples = true".into())
        })?;
        let total = samples.len() as f64;
        let mut push = |kind, bin: f64, count: usize| {
            rows.push(HistogramRow {
                instance,
                iteration: r.iteration,
                kind,
                bin,
                count,
                fraction: count as f64 / total,
            })
        };
        let mut raw = vec![0; trace.n + 1];
        let mut eff = vec![0; trace.n + 1];
        for x in samples {
            raw[x.hamming_weight()] += 1;
            eff[x.xor(&r.frame_gauge.mask)?.hamming_weight()] += 1;
        }
        for (w, &c) in raw.iter().enumerate() {
            push(HistogramKind::RawHw, w as f64, c);
        }
        for (w, &c) in eff.iter().enumerate() {
            push(HistogramKind::EffectiveHw, w as f64, c);
        }
        if let Some(hist) = &r.ar_histogram {
            for (b, &c) in hist.iter().enumerate() {
                push(HistogramKind::Ar, -1.0 + 2.0 * b as f64 / AR_BINS as f64, c);
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct DistributionResult {
    pub rows: Vec<HistogramRow>,
    pub traces: Vec<NdarTrace>,
}

/// NDAR runs with stored samples and their per-iteration histograms.
pub fn distribution_study(cfg: &ExperimentConfig) -> Result<DistributionResult> {
    if !cfg.keep_samples {
        return Err(Error::Config(
            "distribution study needs stored samples; set keep_samples = true".into(),
        ));
    }
    let instances = prepare_instances(cfg)?;
    let traces = ndar_runs(cfg, &instances)?;
    let mut rows = Vec::new();
    for (inst, trace) in instances.iter().zip(&traces) {
        rows.extend(trace_histograms(inst.index, trace)?);
    }
    Ok(DistributionResult { rows, traces })
}

/// Mode of a histogram; ties go to the lowest bin.
pub fn histogram_mode(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}
