use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ising::{generate_sk, read_instance, Bitstring, IsingHamiltonian};
use crate::paramopt::{SearchSpace, Strategy, TpeConfig};
use crate::remap::{NdarConfig, TerminationRule};
use crate::seed;
use crate::simulator::{Backend, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Correlation,
    #[default]
    Convergence,
    Distributions,
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(StudyKind::Correlation),
            "convergence" => Ok(StudyKind::Convergence),
            "distributions" => Ok(StudyKind::Distributions),
            other => Err(Error::Config(format!("unknown study kind {other:?}"))),
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::Correlation => "correlation",
            StudyKind::Convergence => "convergence",
            StudyKind::Distributions => "distributions",
        })
    }
}

/// Everything a run depends on. Read from a flat `key = value` file; keys
/// left out take the defaults of the chosen `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: StudyKind,
    /// Spins per generated SK instance.
    pub n: usize,
    /// Number of generated instances.
    pub instances: usize,
    /// Instance `k` is generated from `instance_seed + k`.
    pub instance_seed: u64,
    /// Instance files used instead of generated ones.
    pub instance_files: Vec<PathBuf>,
    /// Known ground energies, one per instance, for problems too large to enumerate.
    pub ground_energies: Vec<f64>,
    /// Root of every other seed.
    pub seed: u64,
    pub backend: Backend,
    pub gamma_1q: f64,
    pub gamma_2q: f64,
    /// Attractor as a bitstring; empty means all zeros.
    pub attractor: String,
    pub p: usize,
    /// `tpe`, `random` or `grid`.
    pub strategy: String,
    pub grid_points: usize,
    pub tpe_gamma_split: f64,
    pub tpe_startup: usize,
    pub tpe_candidates: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Cost-function evaluations `t` per optimization.
    pub trials: usize,
    /// Samples `s` per evaluation.
    pub shots: usize,
    /// Gate orderings available per optimization.
    pub orderings: usize,
    pub max_iters: usize,
    pub termination: Vec<String>,
    pub epsilon: f64,
    /// Random gauges per instance (correlation study).
    pub gauges: usize,
    pub quantiles: Vec<f64>,
    pub keep_samples: bool,
    pub svg: bool,
    pub dump_circuit: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: StudyKind) -> Self {
        let search = SearchSpace::standard(1, 1);
        let tpe = TpeConfig::default();
        let (trials, shots) = match kind {
            StudyKind::Correlation => (100, 256),
            _ => (20, 100),
        };
        ExperimentConfig {
            kind,
            n: 16,
            instances: 10,
            instance_seed: 0,
            instance_files: Vec::new(),
            ground_energies: Vec::new(),
            seed: 0,
            backend: Backend::Trajectories,
            gamma_1q: NoiseModel::strong(1).gamma_1q,
            gamma_2q: NoiseModel::strong(1).gamma_2q,
            attractor: String::new(),
            p: 1,
            strategy: "tpe".into(),
            grid_points: 5,
            tpe_gamma_split: tpe.gamma_split,
            tpe_startup: tpe.n_startup,
            tpe_candidates: tpe.candidates,
            gamma_min: search.gamma_range.0,
            gamma_max: search.gamma_range.1,
            beta_min: search.beta_range.0,
            beta_max: search.beta_range.1,
            trials,
            shots,
            orderings: 10,
            max_iters: 5,
            termination: vec!["no_improvement".into(), "max_iters".into()],
            epsilon: 0.0,
            gauges: 20,
            quantiles: vec![0.001, 0.1, 1.0],
            keep_samples: true,
            svg: false,
            dump_circuit: false,
        }
    }

    /// Parses a config text, overlaying it on the defaults of its `kind`
    /// (or of `fallback` when the text names none).
    pub fn parse(text: &str, fallback: StudyKind) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let kind = match user.get("kind") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("kind must be a string, got {other}"))),
            None => fallback,
        };
        let mut table = toml::Table::try_from(Self::defaults(kind)).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in user {
            table.insert(k, v);
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, fallback: StudyKind) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, fallback)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical text form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("instances", self.instances),
            ("p", self.p),
            ("trials", self.trials),
            ("shots", self.shots),
            ("orderings", self.orderings),
            ("max_iters", self.max_iters),
            ("gauges", self.gauges),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !self.ground_energies.is_empty() && self.ground_energies.len() != self.instance_count() {
            return Err(Error::Config(format!(
                "{} ground energies for {} instances",
                self.ground_energies.len(),
                self.instance_count()
            )));
        }
        for q in &self.quantiles {
            if !(*q > 0.0 && *q <= 1.0) {
                return Err(Error::Config(format!("quantile {q} outside (0, 1]")));
            }
        }
        self.noise()?;
        self.strategy()?;
        self.search_space(1)?.validate()?;
        self.termination_rules()?;
        self.attractor_bits()?;
        Ok(())
    }

    pub fn instance_count(&self) -> usize {
        if self.instance_files.is_empty() {
            self.instances
        } else {
            self.instance_files.len()
        }
    }

    /// Spin count of the generated instances, or of the first file.
    pub fn problem_size(&self) -> Result<usize> {
        match self.instance_files.first() {
            Some(f) => Ok(read_instance(f)?.n()),
            None => Ok(self.n),
        }
    }

    pub fn load_instances(&self) -> Result<Vec<IsingHamiltonian>> {
        if self.instance_files.is_empty() {
            (0..self.instances as u64)
                .map(|k| generate_sk(self.n, self.instance_seed + k))
                .collect()
        } else {
            self.instance_files
                .iter()
                .map(|f| {
                    read_instance(f).map_err(|e| match e {
                        Error::Io(io) => Error::Config(format!("instance file {}: {io}", f.display())),
                        other => other,
                    })
                })
                .collect()
        }
    }

    pub fn instance_seeds(&self) -> Vec<u64> {
        if self.instance_files.is_empty() {
            (0..self.instances as u64).map(|k| self.instance_seed + k).collect()
        } else {
            Vec::new()
        }
    }

    pub fn attractor_bits(&self) -> Result<Option<Bitstring>> {
        if self.attractor.is_empty() {
            return Ok(None);
        }
        self.attractor
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("attractor {:?} is not a bitstring", self.attractor)))
    }

    pub fn attractor_for(&self, n: usize) -> Result<Bitstring> {
        match self.attractor_bits()? {
            None => Ok(Bitstring::zeros(n)),
            Some(a) if a.len() == n => Ok(a),
            Some(a) => Err(Error::Config(format!("attractor has {} bits, problem has {n}", a.len()))),
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        let m = NoiseModel {
            gamma_1q: self.gamma_1q,
            gamma_2q: self.gamma_2q,
            attractor: Bitstring::zeros(0),
        };
        m.validate(0)?;
        Ok(m)
    }

    /// Noise model with the configured attractor for `n` spins.
    pub fn noise_for(&self, n: usize) -> Result<NoiseModel> {
        Ok(self.noise()?.with_attractor(self.attractor_for(n)?))
    }

    pub fn strategy(&self) -> Result<Strategy> {
        match self.strategy.as_str() {
            "random" => Ok(Strategy::Random),
            "grid" if self.grid_points > 0 => Ok(Strategy::Grid {
                points_per_dim: self.grid_points,
            }),
            "grid" => Err(Error::Config("grid_points must be >= 1".into())),
            "tpe" => {
                if !(self.tpe_gamma_split > 0.0 && self.tpe_gamma_split < 1.0) {
                    return Err(Error::Config("tpe_gamma_split must lie in (0, 1)".into()));
                }
                Ok(Strategy::Tpe(TpeConfig {
                    gamma_split: self.tpe_gamma_split,
                    n_startup: self.tpe_startup,
                    candidates: self.tpe_candidates.max(1),
                }))
            }
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }

    pub fn search_space(&self, orderings: usize) -> Result<SearchSpace> {
        let s = SearchSpace {
            p: self.p,
            gamma_range: (self.gamma_min, self.gamma_max),
            beta_range: (self.beta_min, self.beta_max),
            orderings: (0..orderings).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn termination_rules(&self) -> Result<Vec<TerminationRule>> {
        self.termination.iter().map(|r| r.parse()).collect()
    }

    pub fn ndar_config(&self, n: usize) -> Result<NdarConfig> {
        let cfg = NdarConfig {
            samples_per_iter: self.trials * self.shots,
            trials_per_iter: self.trials,
            max_iters: self.max_iters,
            termination: self.termination_rules()?,
            epsilon: self.epsilon,
            attractor: self.attractor_for(n)?,
            orderings_per_iter: self.orderings,
            keep_samples: self.keep_samples,
        };
        cfg.validate(n)?;
        Ok(cfg)
    }

    /// Seed of a job identified by `tags`, derived from the root seed.
    pub fn job_seed(&self, tags: &[u64]) -> u64 {
        seed::derive(self.seed, tags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_defaults_and_overlay() {
        let c = ExperimentConfig::parse("kind = \"correlation\"\nn = 12\n", StudyKind::Convergence).unwrap();
        assert_eq!((c.kind, c.n, c.trials, c.shots, c.gauges), (StudyKind::Correlation, 12, 100, 256, 20));
        let c = ExperimentConfig::parse("", StudyKind::Convergence).unwrap();
        assert_eq!((c.n, c.instances, c.trials, c.shots), (16, 10, 20, 100));
    }

    #[test]
    fn round_trip_text() {
        let mut c = ExperimentConfig::defaults(StudyKind::Distributions);
        c.attractor = "0101".into();
        c.n = 4;
        let back = ExperimentConfig::parse(&c.to_text(), StudyKind::Convergence).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "n = 0",
            "nonsense = 1",
            "kind = \"scatter\"",
            "strategy = \"anneal\"",
            "gamma_2q = 1.5",
            "termination = [\"sometimes\"]",
            "quantiles = [0.0]",
            "gamma_min = 1.0\ngamma_max = 0.0",
            "n = [",
        ] {
            let err = ExperimentConfig::parse(text, StudyKind::Convergence).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn attractor_length_checked() {
        let c = ExperimentConfig::parse("attractor = \"0110\"", StudyKind::Convergence).unwrap();
        assert!(c.attractor_for(4).is_ok());
        assert!(c.attractor_for(5).is_err());
    }
}
