//! Execution backends for compiled QAOA gate lists.
//!
//! All backends start from `|+>^n`, resolve chain positions back to logical
//! qubits and report outcomes in the logical frame. Noise is amplitude
//! damping applied after every gate to each qubit the gate touches, relaxing
//! toward the configured attractor bit of that qubit.

mod density;
mod statevector;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use density::simulate_density_oracle;
pub use statevector::{noiseless_probabilities, simulate_noiseless, simulate_trajectories};

use crate::circuit::GateList;
use crate::error::{Error, Result};
use crate::ising::{Bitstring, IsingHamiltonian};
use crate::seed;

pub const STATEVECTOR_CAP: usize = 26;
pub const DENSITY_CAP: usize = 8;

/// Amplitude-damping strengths per gate class and the classical fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma_1q: f64,
    pub gamma_2q: f64,
    pub attractor: Bitstring,
}

impl NoiseModel {
    pub fn noiseless(n: usize) -> Self {
        NoiseModel {
            gamma_1q: 0.0,
            gamma_2q: 0.0,
            attractor: Bitstring::zeros(n),
        }
    }

    pub fn new(n: usize, gamma_1q: f64, gamma_2q: f64) -> Result<Self> {
        let m = NoiseModel {
            gamma_1q,
            gamma_2q,
            attractor: Bitstring::zeros(n),
        };
        m.validate(n)?;
        Ok(m)
    }

    /// Default strong-damping setting used for the small-scale studies.
    pub fn strong(n: usize) -> Self {
        NoiseModel {
            gamma_1q: 0.02,
            gamma_2q: 0.10,
            attractor: Bitstring::zeros(n),
        }
    }

    pub fn with_attractor(mut self, attractor: Bitstring) -> Self {
        self.attractor = attractor;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.gamma_1q == 0.0 && self.gamma_2q == 0.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, g) in [("gamma_1q", self.gamma_1q), ("gamma_2q", self.gamma_2q)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("{name} = {g} outside [0, 1]")));
            }
        }
        self.attractor.check_len(n)
    }
}

/// Measured bitstrings of one circuit execution, in the logical frame of the
/// Hamiltonian the circuit was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub shots: usize,
    pub bitstrings: Vec<Bitstring>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn energies(&self, h: &IsingHamiltonian) -> Result<Vec<f64>> {
        self.bitstrings.iter().map(|x| h.energy(x)).collect()
    }

    /// `shot,bitstring,energy` rows with a header line.
    pub fn write_csv<W: Write>(&self, h: &IsingHamiltonian, mut w: W) -> Result<()> {
        writeln!(w, "shot,bitstring,energy")?;
        for (shot, x) in self.bitstrings.iter().enumerate() {
            writeln!(w, "{shot},{x},{}", h.energy(x)?)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Noiseless,
    #[default]
    Trajectories,
    Density,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(Backend::Noiseless),
            "trajectories" => Ok(Backend::Trajectories),
            "density" => Ok(Backend::Density),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected noiseless, trajectories or density)"
            ))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Noiseless => "noiseless",
            Backend::Trajectories => "trajectories",
            Backend::Density => "density",
        })
    }
}

/// Draws `shots` samples from `gl` on the selected backend.
///
/// The density backend samples i.i.d. from the exact noisy distribution.
pub fn sample(
    gl: &GateList,
    backend: Backend,
    noise: &NoiseModel,
    shots: usize,
    seed: u64,
) -> Result<SampleBatch> {
    match backend {
        Backend::Noiseless => simulate_noiseless(gl, shots, seed),
        Backend::Trajectories => simulate_trajectories(gl, noise, shots, seed),
        Backend::Density => {
            let probs = simulate_density_oracle(gl, noise)?;
            Ok(sample_from_probabilities(&probs, gl.n, shots, seed, noise.attractor.to_index()))
        }
    }
}

/// Inverse-CDF sampling with outcomes scanned in the order `u ^ origin`.
///
/// Scanning relative to the attractor makes a globally mirrored
/// distribution with a mirrored attractor yield mirrored samples.
pub(crate) fn sample_from_probabilities(probs: &[f64], n: usize, shots: usize, seed: u64, origin: u64) -> SampleBatch {
    let origin = origin as usize;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for u in 0..probs.len() {
        acc += probs[u ^ origin];
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = (0..probs.len()).rposition(|u| probs[u ^ origin] > 0.0).unwrap_or(0);
    let mut rng = seed::rng(seed);
    let bitstrings = (0..shots)
        .map(|_| {
            let r = rng.gen::<f64>() * total;
            let u = cdf.partition_point(|&c| c <= r).min(last_nonzero);
            Bitstring::from_index((u ^ origin) as u64, n)
        })
        .collect();
    SampleBatch {
        shots,
        bitstrings,
        seed,
    }
}

/// Sample statistics of a batch evaluated in one Hamiltonian frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub min: f64,
    /// `(q, mean of the lowest ceil(q·shots) energies)`.
    pub quantiles: Vec<(f64, f64)>,
}

pub fn estimate_cost(batch: &SampleBatch, h: &IsingHamiltonian, quantiles: &[f64]) -> Result<CostEstimate> {
    if batch.bitstrings.is_empty() {
        return Err(Error::EmptyInput("sample batch"));
    }
    let mut energies = batch.energies(h)?;
    energies.sort_by(f64::total_cmp);
    let quantiles = quantiles
        .iter()
        .map(|&q| Ok((q, sorted_quantile_mean(&energies, q)?)))
        .collect::<Result<_>>()?;
    Ok(CostEstimate {
        mean: energies.iter().sum::<f64>() / energies.len() as f64,
        min: energies[0],
        quantiles,
    })
}

/// Number of best samples making up the top `q` fraction (at least one).
pub fn quantile_count(len: usize, q: f64) -> usize {
    ((q * len as f64 - 1e-9).ceil() as usize).clamp(1, len)
}

/// Mean of the lowest `ceil(q·len)` values of an ascending slice.
pub fn sorted_quantile_mean(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("energies"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("quantile {q} outside (0, 1]")));
    }
    let k = quantile_count(sorted.len(), q);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}
