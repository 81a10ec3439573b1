//! The adaptive remapping loop.
//!
//! Each iteration optimizes the current frame `H_j`, takes the lowest-energy
//! sample `x*` and moves to `H_{j+1} = H_j` gauged by `x* ^ attractor`, so the
//! noise attractor of the next iteration carries the best energy found so
//! far. All frames share one original problem `H_0`; a bitstring `x` of frame
//! `j` corresponds to `x ^ g_j` in the original frame, where `g_j` is the
//! cumulative gauge.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_qaoa_circuit, sample_orderings, GateOrdering, QaoaParams};
use crate::error::{Error, Result};
use crate::ising::{approximation_ratio, Bitstring, EnergyRecord, GaugeMask, IsingHamiltonian};
use crate::paramopt::{best_trial, run_search_observed, Criterion, Evaluation, SearchSpace, Strategy, Trial};
use crate::seed;
use crate::simulator::{sample, Backend, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationRule {
    /// Neither the best energy nor the cost decreased versus the previous iteration.
    NoImprovement,
    /// The iteration budget is exhausted.
    MaxIters,
}

impl FromStr for TerminationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_improvement" => Ok(TerminationRule::NoImprovement),
            "max_iters" => Ok(TerminationRule::MaxIters),
            other => Err(Error::Config(format!("unknown termination rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdarConfig {
    /// Samples `M` drawn per iteration.
    pub samples_per_iter: usize,
    /// Optimizer trials per iteration.
    pub trials_per_iter: usize,
    pub max_iters: usize,
    /// Rules are combined with OR.
    pub termination: Vec<TerminationRule>,
    pub epsilon: f64,
    pub attractor: Bitstring,
    pub orderings_per_iter: usize,
    /// Store every raw sample in the trace.
    pub keep_samples: bool,
}

impl NdarConfig {
    /// `trials_per_iter` trials of `shots` samples each.
    pub fn new(n: usize, trials_per_iter: usize, shots: usize, max_iters: usize) -> Self {
        NdarConfig {
            samples_per_iter: trials_per_iter * shots,
            trials_per_iter,
            max_iters,
            termination: vec![TerminationRule::NoImprovement, TerminationRule::MaxIters],
            epsilon: 0.0,
            attractor: Bitstring::zeros(n),
            orderings_per_iter: 10,
            keep_samples: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.samples_per_iter == 0 || self.trials_per_iter == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "samples_per_iter, trials_per_iter and max_iters must be >= 1".into(),
            ));
        }
        if self.orderings_per_iter == 0 {
            return Err(Error::Config("orderings_per_iter must be >= 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        self.attractor
            .check_len(n)
            .map_err(|_| Error::Config(format!("attractor has {} bits, problem has {n}", self.attractor.len())))
    }
}

/// What one optimization step hands back to the loop.
#[derive(Clone, Debug, Default)]
pub struct OptimizerOutput {
    /// Raw samples in the frame that was optimized.
    pub samples: Vec<Bitstring>,
    /// The optimizer's cost (mean energy of its best trial).
    pub cost: f64,
    pub trials: Vec<Trial>,
}

/// A sampler-backed optimizer run once per iteration.
pub trait StochasticOptimizer {
    fn optimize(&mut self, h: &IsingHamiltonian, iteration: usize) -> Result<OptimizerOutput>;
}

/// QAOA with black-box angle and gate-ordering search.
///
/// Seeds depend only on the root seed and the iteration, never on the
/// Hamiltonian, so different gauges of one problem see identical randomness.
#[derive(Clone, Debug)]
pub struct QaoaOptimizer {
    pub backend: Backend,
    pub noise: NoiseModel,
    pub strategy: Strategy,
    pub p: usize,
    pub trials: usize,
    pub shots: usize,
    pub orderings: usize,
    pub gamma_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub seed: u64,
}

const TAG_ORDERINGS: u64 = 1;
const TAG_SEARCH: u64 = 2;
const TAG_SHOTS: u64 = 3;

impl QaoaOptimizer {
    /// Optimizer matching an NDAR config; the noise attractor is taken from `cfg`.
    pub fn for_config(cfg: &NdarConfig, backend: Backend, noise: NoiseModel, strategy: Strategy, p: usize, seed: u64) -> Result<Self> {
        if cfg.samples_per_iter % cfg.trials_per_iter != 0 {
            return Err(Error::Config(format!(
                "samples_per_iter {} is not a multiple of trials_per_iter {}",
                cfg.samples_per_iter, cfg.trials_per_iter
            )));
        }
        let space = SearchSpace::standard(p, 1);
        Ok(QaoaOptimizer {
            backend,
            noise: noise.with_attractor(cfg.attractor.clone()),
            strategy,
            p,
            trials: cfg.trials_per_iter,
            shots: cfg.samples_per_iter / cfg.trials_per_iter,
            orderings: cfg.orderings_per_iter,
            gamma_range: space.gamma_range,
            beta_range: space.beta_range,
            seed,
        })
    }

    /// Gate orderings available in `iteration`.
    pub fn ordering_pool(&self, n: usize, iteration: usize) -> Result<Vec<GateOrdering>> {
        let available = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k)).unwrap_or(usize::MAX);
        let k = self.orderings.min(available);
        sample_orderings(n, k, seed::derive(self.seed, &[iteration as u64, TAG_ORDERINGS]))
    }

    /// Runs the search, returning all trials and the samples in trial order.
    pub fn search(&self, h: &IsingHamiltonian, iteration: usize) -> Result<(Vec<Trial>, Vec<Bitstring>)> {
        self.search_observed(h, iteration, |_| Ok(()))
    }

    /// As [`QaoaOptimizer::search`], reporting each trial as it completes.
    pub fn search_observed<O>(&self, h: &IsingHamiltonian, iteration: usize, observe: O) -> Result<(Vec<Trial>, Vec<Bitstring>)>
    where
        O: FnMut(&Trial) -> Result<()>,
    {
        let pool = self.ordering_pool(h.n(), iteration)?;
        let space = SearchSpace {
            p: self.p,
            gamma_range: self.gamma_range,
            beta_range: self.beta_range,
            orderings: (0..pool.len()).collect(),
        };
        let mut samples = Vec::with_capacity(self.trials * self.shots);
        let mut t = 0u64;
        let trials = run_search_observed(
            |params: &QaoaParams, oid| {
                let gl = build_qaoa_circuit(h, params, &pool[oid])?;
                let shot_seed = seed::derive(self.seed, &[iteration as u64, TAG_SHOTS, t]);
                t += 1;
                let batch = sample(&gl, self.backend, &self.noise, self.shots, shot_seed)?;
                let energies = batch.energies(h)?;
                let (mut best, mut min) = (0, f64::INFINITY);
                for (k, &e) in energies.iter().enumerate() {
                    if e < min {
                        best = k;
                        min = e;
                    }
                }
                let mean = energies.iter().sum::<f64>() / energies.len() as f64;
                let record = EnergyRecord {
                    bitstring: batch.bitstrings[best].clone(),
                    energy: min,
                    approximation_ratio: None,
                };
                samples.extend(batch.bitstrings);
                Ok(Evaluation {
                    mean,
                    min,
                    best: Some(record),
                    batch: None,
                })
            },
            &space,
            self.trials,
            &self.strategy,
            seed::derive(self.seed, &[iteration as u64, TAG_SEARCH]),
            observe,
        )?;
        Ok((trials, samples))
    }
}

impl StochasticOptimizer for QaoaOptimizer {
    fn optimize(&mut self, h: &IsingHamiltonian, iteration: usize) -> Result<OptimizerOutput> {
        let (trials, samples) = self.search(h, iteration)?;
        let cost = best_trial(&trials, Criterion::Mean)?.objective;
        Ok(OptimizerOutput { samples, cost, trials })
    }
}

/// Number of approximation-ratio histogram bins over `[-1, 1]`.
pub const AR_BINS: usize = 20;

/// One iteration of the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cumulative gauge of the frame this iteration optimized.
    pub frame_gauge: GaugeMask,
    /// `x* ^ attractor`, absent when the loop stopped here.
    pub gauge_applied: Option<Bitstring>,
    /// Cumulative gauge after this iteration.
    pub cumulative_gauge: GaugeMask,
    /// Energy of the attractor in this iteration's frame.
    pub attractor_energy: f64,
    pub best_energy: f64,
    /// `x*` in this iteration's frame.
    pub best_bitstring: Bitstring,
    /// `x*` in the original frame.
    pub best_original: Bitstring,
    pub mean_energy: f64,
    /// Lowest original-frame energy over iterations `0..=iteration`.
    pub best_so_far: f64,
    pub samples_consumed: usize,
    pub raw_hw_histogram: Vec<usize>,
    pub effective_hw_histogram: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_histogram: Option<Vec<usize>>,
    #[serde(default)]
    pub trials: Vec<Trial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Bitstring>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdarTrace {
    pub n: usize,
    pub hamiltonian_hash: String,
    pub ground_energy: Option<f64>,
    pub config: NdarConfig,
    pub records: Vec<IterationRecord>,
    /// Best original-frame solution.
    pub best: Option<EnergyRecord>,
    /// Rule that ended the loop, if any.
    pub stopped_by: Option<TerminationRule>,
}

impl NdarTrace {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn summary_header() -> &'static str {
        "iteration,attractor_energy,best_energy,mean_energy,best_so_far,best_so_far_ar,samples_consumed,cumulative_gauge,best_original\n"
    }

    /// One row per iteration.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(Self::summary_header());
        for r in &self.records {
            let ar = self
                .ground_energy
                .and_then(|e| approximation_ratio(r.best_so_far, e).ok())
                .map(|a| a.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.attractor_energy,
                r.best_energy,
                r.mean_energy,
                r.best_so_far,
                ar,
                r.samples_consumed,
                r.cumulative_gauge.mask,
                r.best_original
            );
        }
        out
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// The loop stopped on an error; `partial` holds every completed iteration.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct NdarFailure {
    pub partial: Box<NdarTrace>,
    pub error: Error,
}

impl From<NdarFailure> for Error {
    fn from(f: NdarFailure) -> Self {
        f.error
    }
}

/// Whether `rule` fires after the last record.
pub fn termination_check(records: &[IterationRecord], rule: TerminationRule, cfg: &NdarConfig) -> bool {
    let Some(last) = records.last() else {
        return false;
    };
    match rule {
        TerminationRule::NoImprovement => match records.len().checked_sub(2).map(|k| &records[k]) {
            None => false,
            Some(prev) => {
                last.best_energy >= prev.best_energy - cfg.epsilon && last.mean_energy >= prev.mean_energy - cfg.epsilon
            }
        },
        TerminationRule::MaxIters => last.iteration + 1 >= cfg.max_iters,
    }
}

/// Maps a bitstring of a gauged frame back to the original problem.
pub fn to_original_frame(x: &Bitstring, g: &GaugeMask) -> Result<Bitstring> {
    g.apply(x)
}

fn energies_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn hw_histogram<'a>(n: usize, strings: impl Iterator<Item = &'a Bitstring>, mask: Option<&Bitstring>) -> Result<Vec<usize>> {
    let mut hist = vec![0; n + 1];
    for x in strings {
        let w = match mask {
            Some(m) => x.xor(m)?.hamming_weight(),
            None => x.hamming_weight(),
        };
        hist[w] += 1;
    }
    Ok(hist)
}

/// Bin index of an approximation ratio in `AR_BINS` equal bins over `[-1, 1]`.
pub fn ar_bin(ar: f64) -> usize {
    let b = ((ar + 1.0) / 2.0 * AR_BINS as f64).floor();
    (b.max(0.0) as usize).min(AR_BINS - 1)
}

struct LoopState {
    h: IsingHamiltonian,
    gauge: GaugeMask,
    best: Option<EnergyRecord>,
}

/// Runs the loop from the original problem `h0`.
pub fn run_ndar(
    h0: &IsingHamiltonian,
    optimizer: &mut dyn StochasticOptimizer,
    cfg: &NdarConfig,
    ground_energy: Option<f64>,
) -> std::result::Result<NdarTrace, NdarFailure> {
    let trace = NdarTrace {
        n: h0.n(),
        hamiltonian_hash: h0.content_hash(),
        ground_energy,
        config: cfg.clone(),
        records: Vec::new(),
        best: None,
        stopped_by: None,
    };
    drive(h0, optimizer, trace)
}

/// Continues a persisted trace, re-gauging `h0` by its stored cumulative mask.
///
/// A trace that already stopped is returned unchanged.
pub fn resume(
    h0: &IsingHamiltonian,
    optimizer: &mut dyn StochasticOptimizer,
    trace: NdarTrace,
) -> std::result::Result<NdarTrace, NdarFailure> {
    if trace.stopped_by.is_some() {
        return Ok(trace);
    }
    if trace.hamiltonian_hash != h0.content_hash() {
        return Err(NdarFailure {
            error: Error::Config("trace was recorded for a different Hamiltonian".into()),
            partial: Box::new(trace),
        });
    }
    drive(h0, optimizer, trace)
}

fn drive(
    h0: &IsingHamiltonian,
    optimizer: &mut dyn StochasticOptimizer,
    mut trace: NdarTrace,
) -> std::result::Result<NdarTrace, NdarFailure> {
    let cfg = trace.config.clone();
    let setup = || -> Result<LoopState> {
        cfg.validate(h0.n())?;
        let gauge = match trace.records.last() {
            Some(r) => r.cumulative_gauge.clone(),
            None => GaugeMask::identity(h0.n()),
        };
        Ok(LoopState {
            h: h0.gauge_by(&gauge)?,
            gauge,
            best: trace.best.clone(),
        })
    };
    let mut state = match setup() {
        Ok(s) => s,
        Err(error) => {
            return Err(NdarFailure {
                partial: Box::new(trace),
                error,
            })
        }
    };
    loop {
        let j = trace.records.len();
        match step(h0, optimizer, &cfg, trace.ground_energy, &mut state, &trace.records, j) {
            Ok((record, stop)) => {
                trace.records.push(record);
                trace.best = state.best.clone();
                if let Some(rule) = stop {
                    trace.stopped_by = Some(rule);
                    return Ok(trace);
                }
            }
            Err(error) => {
                return Err(NdarFailure {
                    partial: Box::new(trace),
                    error,
                })
            }
        }
    }
}

fn step(
    h0: &IsingHamiltonian,
    optimizer: &mut dyn StochasticOptimizer,
    cfg: &NdarConfig,
    ground_energy: Option<f64>,
    state: &mut LoopState,
    previous: &[IterationRecord],
    j: usize,
) -> Result<(IterationRecord, Option<TerminationRule>)> {
    let n = h0.n();
    let m = cfg.samples_per_iter;
    let attractor = &cfg.attractor;
    let attractor_energy = state.h.energy(attractor)?;

    // (1) optimize the current frame
    let out = optimizer.optimize(&state.h, j)?;
    if out.samples.len() < m {
        return Err(Error::Invariant(format!(
            "optimizer returned {} samples, iteration needs {m}",
            out.samples.len()
        )));
    }
    let samples = &out.samples[..m];

    // (2) energies in the current frame, (3) pick x*
    let mut best: Option<(f64, Bitstring, &Bitstring)> = None;
    for (k, x) in samples.iter().enumerate() {
        let e = state.h.energy(x)?;
        if k % 100 == 0 {
            let original = h0.energy(&state.gauge.apply(x)?)?;
            if !energies_match(e, original) {
                return Err(Error::Invariant(format!(
                    "iteration {j}: frame energy {e} differs from original-frame energy {original}"
                )));
            }
        }
        let key = x.xor(attractor)?;
        let better = match &best {
            None => true,
            Some((be, bk, _)) => e < *be || (e == *be && key < *bk),
        };
        if better {
            best = Some((e, key, x));
        }
    }
    let (best_energy, _, x_star) = best.ok_or(Error::EmptyInput("iteration samples"))?;
    let x_star = x_star.clone();
    let best_original = state.gauge.apply(&x_star)?;

    let candidate = EnergyRecord::evaluate(h0, best_original.clone(), ground_energy)?;
    if state.best.as_ref().map_or(true, |b| candidate.energy < b.energy) {
        state.best = Some(candidate);
    }
    let best_so_far = state.best.as_ref().map(|b| b.energy).unwrap_or(best_energy);

    let ar_histogram = ground_energy
        .map(|egs| -> Result<Vec<usize>> {
            let mut hist = vec![0; AR_BINS];
            for x in samples {
                hist[ar_bin(approximation_ratio(state.h.energy(x)?, egs)?)] += 1;
            }
            Ok(hist)
        })
        .transpose()?;

    let mut record = IterationRecord {
        iteration: j,
        frame_gauge: state.gauge.clone(),
        gauge_applied: None,
        cumulative_gauge: state.gauge.clone(),
        attractor_energy,
        best_energy,
        best_bitstring: x_star.clone(),
        best_original,
        mean_energy: out.cost,
        best_so_far,
        samples_consumed: m * (j + 1),
        raw_hw_histogram: hw_histogram(n, samples.iter(), None)?,
        effective_hw_histogram: hw_histogram(n, samples.iter(), Some(&state.gauge.mask))?,
        ar_histogram,
        trials: out.trials.into_iter().map(|t| Trial { batch: None, ..t }).collect(),
        samples: cfg.keep_samples.then(|| samples.to_vec()),
    };

    let mut history: Vec<IterationRecord> = previous.to_vec();
    history.push(record.clone());
    if let Some(&rule) = cfg.termination.iter().find(|&&r| termination_check(&history, r, cfg)) {
        return Ok((record, Some(rule)));
    }

    // (4) re-gauge so the attractor carries E*
    let y = x_star.xor(attractor)?;
    let next = state.h.gauge_transform(&y)?;
    let chained = next.energy(attractor)?;
    if !energies_match(chained, best_energy) {
        return Err(Error::Invariant(format!(
            "iteration {j}: attractor energy {chained} after re-gauge, expected {best_energy}"
        )));
    }
    state.h = next;
    state.gauge = state.gauge.compose(&y)?;
    record.gauge_applied = Some(y);
    record.cumulative_gauge = state.gauge.clone();
    Ok((record, None))
}

/// Checks the structural invariants of a finished trace against `h0`.
pub fn verify_trace(trace: &NdarTrace, h0: &IsingHamiltonian) -> Result<()> {
    let cfg = &trace.config;
    let mut cumulative = GaugeMask::identity(h0.n());
    let mut prev_best = f64::INFINITY;
    for (k, r) in trace.records.iter().enumerate() {
        let fail = |what: String| Err(Error::Invariant(format!("iteration {k}: {what}")));
        if r.iteration != k {
            return fail(format!("record index {}", r.iteration));
        }
        if r.frame_gauge.mask != cumulative.mask {
            return fail("frame gauge is not the XOR of earlier gauges".into());
        }
        let frame = h0.gauge_by(&r.frame_gauge)?;
        if !energies_match(frame.energy(&cfg.attractor)?, r.attractor_energy) {
            return fail("attractor energy does not match its frame".into());
        }
        if k > 0 && !energies_match(r.attractor_energy, trace.records[k - 1].best_energy) {
            return fail("attractor energy differs from the previous best energy".into());
        }
        if !energies_match(frame.energy(&r.best_bitstring)?, r.best_energy) {
            return fail("best energy does not match its bitstring".into());
        }
        if r.frame_gauge.apply(&r.best_bitstring)? != r.best_original
            || !energies_match(h0.energy(&r.best_original)?, r.best_energy)
        {
            return fail("best bitstring does not map to the original frame".into());
        }
        if r.best_so_far > prev_best {
            return fail("best-so-far energy increased".into());
        }
        prev_best = r.best_so_far;
        if r.samples_consumed != cfg.samples_per_iter * (k + 1) {
            return fail(format!("{} samples consumed", r.samples_consumed));
        }
        if let Some(y) = &r.gauge_applied {
            if *y != r.best_bitstring.xor(&cfg.attractor)? {
                return fail("applied gauge is not x* ^ attractor".into());
            }
            cumulative = cumulative.compose(y)?;
        }
        if r.cumulative_gauge.mask != cumulative.mask {
            return fail("cumulative gauge mismatch".into());
        }
        if let Some(samples) = &r.samples {
            for x in samples.iter().step_by(100) {
                if !energies_match(frame.energy(x)?, h0.energy(&r.frame_gauge.apply(x)?)?) {
                    return fail("sample frame energy mismatch".into());
                }
            }
        }
    }
    Ok(())
}

/// Most frequent outcome of a zero-angle QAOA circuit on `h` (ties to the
/// lexicographically smallest); under damping this is the attractor.
pub fn discover_attractor(h: &IsingHamiltonian, backend: Backend, noise: &NoiseModel, shots: usize, seed: u64) -> Result<Bitstring> {
    let gl = build_qaoa_circuit(h, &QaoaParams::constant(1, 0.0), &GateOrdering::identity(h.n()))?;
    let batch = sample(&gl, backend, noise, shots, seed)?;
    let mut counts: HashMap<&Bitstring, usize> = HashMap::new();
    for x in &batch.bitstrings {
        *counts.entry(x).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(x, _)| x.clone())
        .ok_or(Error::EmptyInput("attractor probe batch"))
}
