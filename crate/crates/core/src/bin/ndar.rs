use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ndar::harness::{self, stats, ExperimentConfig, RunManifest, StudyKind};
use ndar::ising::{generate_sk, read_instance, serialize_instance};
use ndar::simulator::Backend;
use ndar::solvers::{brute_force_with_cap, simulated_annealing, AnnealSchedule, DEFAULT_BRUTE_FORCE_CAP};
use ndar::{Error, Result};

#[derive(Parser)]
#[command(name = "ndar", version, about = "Noise-directed adaptive remapping experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Key-value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// noiseless, trajectories or density
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write the compiled circuit of the best trial
    #[arg(long, global = true)]
    dump_circuit: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an SK instance
    Gen {
        #[arg(long)]
        n: usize,
        /// Write here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exhaustive ground-state search
    SolveExact {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
        cap: usize,
    },
    /// Simulated annealing
    Anneal {
        instance: PathBuf,
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
        #[arg(long, default_value_t = 32)]
        replicas: usize,
        #[arg(long, default_value_t = 0.1)]
        beta_start: f64,
        #[arg(long, default_value_t = 3.0)]
        beta_end: f64,
    },
    /// One QAOA parameter search
    Qaoa {
        instance: PathBuf,
        #[command(flatten)]
        budget: Budget,
    },
    /// Adaptive remapping loop
    Ndar {
        instance: PathBuf,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Continue a stored trace
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run a configured study
    Study { kind: StudyKind },
    /// Pearson and Spearman correlation of two CSV columns
    Stats {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Repeat a run from its manifest
    Rerun {
        manifest: PathBuf,
        /// Fail unless the CSV outputs match the original run byte for byte
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct Budget {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// tpe, random or grid
    #[arg(long)]
    strategy: Option<String>,
}

impl Budget {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.shots {
            cfg.shots = s;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = s.clone();
        }
    }
}

fn load_config(g: &Global, kind: StudyKind) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path, kind)?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(b) = g.backend {
        cfg.backend = b;
    }
    cfg.dump_circuit |= g.dump_circuit;
    Ok(cfg)
}

fn finish(cfg: ExperimentConfig) -> Result<ExperimentConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn report(m: &RunManifest, dir: &Path) {
    for f in &m.outputs {
        eprintln!("wrote {}", dir.join(f).display());
    }
    eprintln!("wrote {}", dir.join("manifest.json").display());
}

fn read_columns(path: &Path, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or(Error::EmptyInput("csv"))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("no column {name:?} in {}", path.display())))
    };
    let (cx, cy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: k + 2,
                    message: format!("column {c} is not a number"),
                })
        };
        xs.push(get(cx)?);
        ys.push(get(cy)?);
    }
    Ok((xs, ys))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(jobs) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Gen { n, output } => {
            let cfg = load_config(g, StudyKind::Convergence)?;
            let h = generate_sk(*n, cfg.seed)?;
            match output {
                Some(path) => ndar::ising::write_instance(path, &h)?,
                None => print!("{}", serialize_instance(&h)),
            }
        }
        Command::SolveExact { instance, cap } => {
            let h = read_instance(instance)?;
            print_json(&brute_force_with_cap(&h, *cap)?.summary_json())?;
        }
        Command::Anneal {
            instance,
            sweeps,
            replicas,
            beta_start,
            beta_end,
        } => {
            let cfg = load_config(g, StudyKind::Convergence)?;
            let h = read_instance(instance)?;
            let schedule = AnnealSchedule {
                sweeps: *sweeps,
                beta_start: *beta_start,
                beta_end: *beta_end,
                replicas: *replicas,
                seed: cfg.seed,
            };
            let records = simulated_annealing(&h, &schedule)?;
            let best = records
                .iter()
                .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.bitstring.cmp(&b.bitstring)))
                .ok_or(Error::EmptyInput("annealing replicas"))?;
            print_json(best)?;
        }
        Command::Qaoa { instance, budget } => {
            let mut cfg = load_config(g, StudyKind::Convergence)?;
            budget.apply(&mut cfg);
            let m = harness::run_qaoa(&finish(cfg)?, instance, &g.out_dir)?;
            report(&m, &g.out_dir);
        }
        Command::Ndar {
            instance,
            budget,
            max_iters,
            resume,
        } => {
            let mut cfg = load_config(g, StudyKind::Convergence)?;
            budget.apply(&mut cfg);
            if let Some(m) = max_iters {
                cfg.max_iters = *m;
            }
            let m = harness::run_ndar_instance(&finish(cfg)?, instance, &g.out_dir, resume.as_deref())?;
            report(&m, &g.out_dir);
        }
        Command::Study { kind } => {
            let cfg = load_config(g, *kind)?;
            if cfg.kind != *kind {
                return Err(Error::Config(format!("config is for a {} study, not {kind}", cfg.kind)));
            }
            let m = harness::run_study(&finish(cfg)?, &g.out_dir)?;
            report(&m, &g.out_dir);
        }
        Command::Stats { csv, x, y } => {
            let (xs, ys) = read_columns(csv, x, y)?;
            print_json(&stats::correlate(&xs, &ys)?)?;
        }
        Command::Rerun { manifest, check } => {
            let m = harness::rerun(manifest, &g.out_dir)?;
            report(&m, &g.out_dir);
            if *check {
                let original = manifest.parent().unwrap_or(Path::new("."));
                let diff = harness::csv_differences(&m, original, &g.out_dir)?;
                if !diff.is_empty() {
                    return Err(Error::Invariant(format!("CSV outputs differ: {}", diff.join(", "))));
                }
                eprintln!("all CSV outputs identical");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
