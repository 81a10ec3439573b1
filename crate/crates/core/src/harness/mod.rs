//! Experiment configuration, studies, statistics and run artifacts.
//!
//! Every run writes its outputs plus a `manifest.json` holding the full
//! configuration, the instance hashes and the seeds, so that the run can be
//! repeated with [`rerun`].

mod config;
pub mod stats;
mod studies;
pub mod svg;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, StudyKind};
pub use studies::{
    convergence_study, correlation_study, distribution_study, gauge_spread, histogram_mode, ndar_runs,
    prepare_instances, trace_histograms, ConvergenceResult, ConvergenceRow, CorrelationResult, CorrelationRow,
    DistributionResult, HistogramKind, HistogramRow, Instance, QuantileCorrelation,
};

use crate::circuit::build_qaoa_circuit;
use crate::error::{Error, Result};
use crate::ising::{approximation_ratio, read_instance, IsingHamiltonian};
use crate::paramopt::{best_trial, trials_csv_header, trials_csv_row, Criterion, Trial};
use crate::remap::{resume, run_ndar, NdarTrace};
use svg::{chart, Mark, Series};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const TAG_QAOA_RUN: u64 = 20;
const TAG_NDAR_RUN: u64 = 21;

/// What produced a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunCommand {
    Study { kind: StudyKind },
    Qaoa { instance: PathBuf },
    Ndar { instance: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub run: RunCommand,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub instance_hashes: Vec<String>,
    pub root_seed: u64,
    pub instance_seeds: Vec<u64>,
    /// Output files, relative to the run directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(run: RunCommand, cfg: &ExperimentConfig, instances: &[&IsingHamiltonian]) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            run,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            instance_hashes: instances.iter().map(|h| h.content_hash()).collect(),
            root_seed: cfg.seed,
            instance_seeds: cfg.instance_seeds(),
            outputs: Vec::new(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad manifest {}: {e}", path.display())))
    }

    fn finish(mut self, dir: &Path, outputs: Vec<String>) -> Result<Self> {
        self.outputs = outputs;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self)?)?;
        Ok(self)
    }
}

/// Collects the files a run writes.
struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir, names: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

fn trials_header_with(prefix: &str, p: usize) -> String {
    format!("{prefix},{}\n", trials_csv_header(p))
}

/// Runs the configured study and writes its outputs into `out_dir`.
pub fn run_study(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let mut out = Outputs::new(out_dir)?;
    let hs = cfg.load_instances()?;
    let manifest = RunManifest::new(RunCommand::Study { kind: cfg.kind }, cfg, &hs.iter().collect::<Vec<_>>());
    match cfg.kind {
        StudyKind::Correlation => write_correlation(cfg, &correlation_study(cfg)?, &mut out)?,
        StudyKind::Convergence => write_convergence(cfg, &convergence_study(cfg)?, &mut out)?,
        StudyKind::Distributions => write_distributions(cfg, &distribution_study(cfg)?, &mut out)?,
    }
    manifest.finish(out_dir, out.names)
}

fn write_correlation(cfg: &ExperimentConfig, r: &CorrelationResult, out: &mut Outputs) -> Result<()> {
    let mut s = String::from("instance,gauge,gauge_mask,attractor_ar,best_trial,shots");
    for q in &r.quantiles {
        let _ = write!(s, ",ar_q{q}");
    }
    s.push_str(",mean_ar_stderr\n");
    for row in &r.rows {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            row.instance, row.gauge, row.gauge_mask, row.attractor_ar, row.best_trial, row.shots
        );
        for a in &row.quantile_ars {
            let _ = write!(s, ",{a}");
        }
        let _ = writeln!(s, ",{}", row.mean_ar_stderr);
    }
    out.write("summary.csv", &s)?;

    let mut s = String::from("quantile,pairs,pearson_r,pearson_p,spearman_rho,spearman_p,note\n");
    for c in &r.correlations {
        match &c.stats {
            Some(st) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},",
                    c.quantile, st.pairs, st.pearson_r, st.pearson_p, st.spearman_rho, st.spearman_p
                );
            }
            None => {
                let note = c.error.clone().unwrap_or_default().replace(',', ";");
                let _ = writeln!(s, "{},{},,,,,{note}", c.quantile, r.rows.len());
            }
        }
    }
    out.write("stats.csv", &s)?;

    let mut s = trials_header_with("instance,gauge", cfg.p);
    for (i, g, t) in &r.trials {
        let _ = writeln!(s, "{i},{g},{}", trials_csv_row(t));
    }
    out.write("trials.csv", &s)?;

    if cfg.svg {
        let full = r.quantiles.len() - 1;
        let series = vec![Series {
            name: format!("ar_q{}", r.quantiles[full]),
            points: r.rows.iter().map(|row| (row.attractor_ar, row.quantile_ars[full])).collect(),
        }];
        out.write(
            "correlation.svg",
            &chart("Attractor AR vs achieved AR", "attractor AR", "mean AR", &series, Mark::Dots),
        )?;
    }
    Ok(())
}

fn write_traces(traces: &[NdarTrace], out: &mut Outputs) -> Result<()> {
    for (i, t) in traces.iter().enumerate() {
        out.write(&format!("trace_{i:03}.json"), &serde_json::to_string_pretty(t)?)?;
    }
    Ok(())
}

fn ndar_trials_csv(p: usize, traces: &[(usize, &NdarTrace)]) -> String {
    let mut s = trials_header_with("instance,iteration", p);
    for (i, t) in traces {
        for r in &t.records {
            for trial in &r.trials {
                let _ = writeln!(s, "{i},{},{}", r.iteration, trials_csv_row(trial));
            }
        }
    }
    s
}

fn write_convergence(cfg: &ExperimentConfig, r: &ConvergenceResult, out: &mut Outputs) -> Result<()> {
    let mut s = String::from("instance,iteration,samples,ndar_best_ar,qaoa_best_ar,random_best_ar\n");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            row.instance, row.iteration, row.samples, row.ndar_best_ar, row.qaoa_best_ar, row.random_best_ar
        );
    }
    out.write("summary.csv", &s)?;
    let indexed: Vec<(usize, &NdarTrace)> = r.traces.iter().enumerate().collect();
    out.write("trials.csv", &ndar_trials_csv(cfg.p, &indexed))?;
    let mut s = trials_header_with("instance", cfg.p);
    for (i, ts) in r.qaoa_trials.iter().enumerate() {
        for t in ts {
            let _ = writeln!(s, "{i},{}", trials_csv_row(t));
        }
    }
    out.write("qaoa_trials.csv", &s)?;
    write_traces(&r.traces, out)?;

    if cfg.svg {
        let arms: [(&str, fn(&ConvergenceRow) -> f64); 3] = [
            ("NDAR", |r| r.ndar_best_ar),
            ("QAOA", |r| r.qaoa_best_ar),
            ("random", |r| r.random_best_ar),
        ];
        let series = arms
            .iter()
            .map(|(name, f)| Series {
                name: name.to_string(),
                points: (0..cfg.max_iters)
                    .map(|i| {
                        let v: Vec<f64> = r.rows.iter().filter(|row| row.iteration == i).map(f).collect();
                        (i as f64, v.iter().sum::<f64>() / v.len().max(1) as f64)
                    })
                    .collect(),
            })
            .collect::<Vec<_>>();
        out.write(
            "convergence.svg",
            &chart("Best AR at matched budget", "iteration", "mean best AR", &series, Mark::Lines),
        )?;
    }
    Ok(())
}

fn write_distributions(cfg: &ExperimentConfig, r: &DistributionResult, out: &mut Outputs) -> Result<()> {
    let mut s = String::from("instance,iteration,kind,bin,count,fraction\n");
    for h in &r.rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", h.instance, h.iteration, h.kind.name(), h.bin, h.count, h.fraction);
    }
    out.write("summary.csv", &s)?;
    let mut s = String::from("instance,");
    s.push_str(NdarTrace::summary_header());
    for (i, t) in r.traces.iter().enumerate() {
        for line in t.summary_csv().lines().skip(1) {
            let _ = writeln!(s, "{i},{line}");
        }
    }
    out.write("iterations.csv", &s)?;
    let indexed: Vec<(usize, &NdarTrace)> = r.traces.iter().enumerate().collect();
    out.write("trials.csv", &ndar_trials_csv(cfg.p, &indexed))?;
    write_traces(&r.traces, out)?;

    if cfg.svg {
        let last = r.rows.iter().map(|h| h.iteration).max().unwrap_or(0);
        let series = [(0, HistogramKind::RawHw), (last, HistogramKind::EffectiveHw)]
            .iter()
            .map(|&(it, kind)| {
                let mut bins = vec![0usize; cfg.problem_size().unwrap_or(cfg.n) + 1];
                let mut total = 0usize;
                for h in r.rows.iter().filter(|h| h.kind == kind && h.iteration == it) {
                    bins[h.bin as usize] += h.count;
                    total += h.count;
                }
                Series {
                    name: format!("{} iter {it}", kind.name()),
                    points: bins
                        .iter()
                        .enumerate()
                        .map(|(w, &c)| (w as f64, c as f64 / total.max(1) as f64))
                        .collect(),
                }
            })
            .collect::<Vec<_>>();
        out.write(
            "distributions.svg",
            &chart("Hamming weight distributions", "Hamming weight", "fraction", &series, Mark::Bars),
        )?;
    }
    Ok(())
}

/// Ground energy for single-instance runs: supplied, enumerated when small, or unknown.
fn reference_energy(cfg: &ExperimentConfig, h: &IsingHamiltonian) -> Result<Option<f64>> {
    if let Some(&e) = cfg.ground_energies.first() {
        return Ok(Some(e));
    }
    if h.n() <= crate::solvers::DEFAULT_BRUTE_FORCE_CAP {
        let e = crate::solvers::brute_force(h)?.energy;
        return Ok((e < 0.0).then_some(e));
    }
    Ok(None)
}

fn load_single(path: &Path) -> Result<IsingHamiltonian> {
    read_instance(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("instance file {}: {io}", path.display())),
        other => other,
    })
}

/// One QAOA parameter search on a single instance.
///
/// Writes `trials.csv` (streamed while the search runs), `summary.csv` for
/// the best trial, its samples in `samples.csv`, and optionally its circuit.
pub fn run_qaoa(cfg: &ExperimentConfig, instance: &Path, out_dir: &Path) -> Result<RunManifest> {
    let h = load_single(instance)?;
    let egs = reference_energy(cfg, &h)?;
    let mut out = Outputs::new(out_dir)?;
    let manifest = RunManifest::new(
        RunCommand::Qaoa {
            instance: instance.to_path_buf(),
        },
        cfg,
        &[&h],
    );
    let opt = studies::optimizer(cfg, h.n(), cfg.trials, cfg.orderings, cfg.job_seed(&[TAG_QAOA_RUN]))?;
    let mut log = out.create("trials.csv")?;
    log.write_all(trials_header_with("frame", cfg.p).as_bytes())?;
    let (trials, samples) = opt.search_observed(&h, 0, |t: &Trial| {
        writeln!(log, "original,{}", trials_csv_row(t))?;
        log.flush()?;
        Ok(())
    })?;
    drop(log);

    let best = best_trial(&trials, Criterion::Mean)?;
    let best_min = best_trial(&trials, Criterion::Min)?;
    let record = best_min.best_in_trial.clone().ok_or(Error::EmptyInput("best trial samples"))?;
    let ar = |e: f64| egs.map(|g| approximation_ratio(e, g)).transpose();
    let mut s = String::from("best_trial,mean,mean_ar,min_trial,min,min_ar,min_bitstring,ground_energy\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{}",
        best.trial_index,
        best.objective,
        ar(best.objective)?.map(|a| a.to_string()).unwrap_or_default(),
        best_min.trial_index,
        record.energy,
        ar(record.energy)?.map(|a| a.to_string()).unwrap_or_default(),
        record.bitstring,
        egs.map(|e| e.to_string()).unwrap_or_default()
    );
    out.write("summary.csv", &s)?;

    let batch = crate::simulator::SampleBatch {
        shots: cfg.shots,
        bitstrings: samples[best.trial_index * cfg.shots..(best.trial_index + 1) * cfg.shots].to_vec(),
        seed: 0,
    };
    let mut w = out.create("samples.csv")?;
    batch.write_csv(&h, &mut w)?;
    w.flush()?;

    if cfg.dump_circuit {
        let pool = opt.ordering_pool(h.n(), 0)?;
        let gl = build_qaoa_circuit(&h, &best.params, &pool[best.ordering_id])?;
        out.write("circuit.txt", &gl.to_text())?;
    }
    manifest.finish(out_dir, out.names)
}

/// NDAR on a single instance; `resume_from` continues a stored trace.
///
/// On an optimizer failure the partial trace is still written before the
/// error is returned.
pub fn run_ndar_instance(
    cfg: &ExperimentConfig,
    instance: &Path,
    out_dir: &Path,
    resume_from: Option<&Path>,
) -> Result<RunManifest> {
    let h = load_single(instance)?;
    let egs = reference_energy(cfg, &h)?;
    let mut out = Outputs::new(out_dir)?;
    let manifest = RunManifest::new(
        RunCommand::Ndar {
            instance: instance.to_path_buf(),
        },
        cfg,
        &[&h],
    );
    let ncfg = cfg.ndar_config(h.n())?;
    let mut opt = studies::optimizer(cfg, h.n(), cfg.trials, cfg.orderings, cfg.job_seed(&[TAG_NDAR_RUN]))?;
    let outcome = match resume_from {
        Some(path) => resume(&h, &mut opt, NdarTrace::read_json(path)?),
        None => run_ndar(&h, &mut opt, &ncfg, egs),
    };
    let (trace, error) = match outcome {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    out.write("trace.json", &serde_json::to_string_pretty(&trace)?)?;
    out.write("summary.csv", &trace.summary_csv())?;
    out.write("trials.csv", &ndar_trials_csv(cfg.p, &[(0, &trace)]))?;
    if cfg.dump_circuit {
        if let Some(last) = trace.records.last() {
            if let Ok(t) = best_trial(&last.trials, Criterion::Mean) {
                let frame = h.gauge_by(&last.frame_gauge)?;
                let pool = opt.ordering_pool(h.n(), last.iteration)?;
                let gl = build_qaoa_circuit(&frame, &t.params, &pool[t.ordering_id])?;
                out.write("circuit.txt", &gl.to_text())?;
            }
        }
    }
    let manifest = manifest.finish(out_dir, out.names)?;
    match error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Repeats the run recorded in `manifest_path` into `out_dir`.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let m = RunManifest::read(manifest_path)?;
    let cfg = &m.config;
    cfg.validate()?;
    if cfg.hash() != m.config_hash {
        return Err(Error::Config("manifest config does not match its hash".into()));
    }
    let fresh = match &m.run {
        RunCommand::Study { .. } => run_study(cfg, out_dir)?,
        RunCommand::Qaoa { instance } => run_qaoa(cfg, instance, out_dir)?,
        RunCommand::Ndar { instance } => run_ndar_instance(cfg, instance, out_dir, None)?,
    };
    if fresh.instance_hashes != m.instance_hashes {
        return Err(Error::Config("instances changed since the manifest was written".into()));
    }
    Ok(fresh)
}

/// CSV outputs of `manifest` whose contents differ between two run directories.
pub fn csv_differences(manifest: &RunManifest, a: &Path, b: &Path) -> Result<Vec<String>> {
    let mut diff = Vec::new();
    for name in manifest.outputs.iter().filter(|n| n.ends_with(".csv")) {
        if fs::read(a.join(name))? != fs::read(b.join(name))? {
            diff.push(name.clone());
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: StudyKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.n = 5;
        c.instances = 2;
        c.trials = 3;
        c.shots = 8;
        c.gauges = 3;
        c.max_iters = 2;
        c.orderings = 2;
        c.svg = true;
        c
    }

    #[test]
    fn studies_rerun_identically() {
        for kind in [StudyKind::Correlation, StudyKind::Convergence, StudyKind::Distributions] {
            let dir = tempfile::tempdir().unwrap();
            let (a, b) = (dir.path().join("a"), dir.path().join("b"));
            let m = run_study(&small(kind), &a).unwrap();
            assert!(m.outputs.iter().any(|o| o.ends_with(".svg")));
            let again = rerun(&a.join("manifest.json"), &b).unwrap();
            assert_eq!(again.outputs, m.outputs);
            assert!(csv_differences(&m, &a, &b).unwrap().is_empty(), "{kind}");
        }
    }

    #[test]
    fn single_instance_runs() {
        let dir = tempfile::tempdir().unwrap();
        let inst = dir.path().join("h.txt");
        crate::ising::write_instance(&inst, &crate::ising::generate_sk(5, 3).unwrap()).unwrap();
        let mut cfg = small(StudyKind::Convergence);
        cfg.dump_circuit = true;
        let m = run_qaoa(&cfg, &inst, &dir.path().join("q")).unwrap();
        for f in ["trials.csv", "summary.csv", "samples.csv", "circuit.txt"] {
            assert!(m.outputs.contains(&f.to_string()), "{f}");
        }
        let trials = fs::read_to_string(dir.path().join("q/trials.csv")).unwrap();
        assert_eq!(trials.lines().count(), 4);

        let m = run_ndar_instance(&cfg, &inst, &dir.path().join("n"), None).unwrap();
        assert!(m.outputs.contains(&"trace.json".to_string()));
        let again = rerun(&dir.path().join("n/manifest.json"), &dir.path().join("n2")).unwrap();
        assert!(csv_differences(&again, &dir.path().join("n"), &dir.path().join("n2")).unwrap().is_empty());
    }

    #[test]
    fn missing_instance_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(StudyKind::Convergence);
        let err = run_qaoa(&cfg, &dir.path().join("nope.txt"), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
