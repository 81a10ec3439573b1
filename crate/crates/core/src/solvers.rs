//! Reference solvers: exhaustive search, simulated annealing, random sampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{Bitstring, EnergyRecord, IsingHamiltonian};
use crate::seed;

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 24;

/// How many minimizers are materialised; the count is always exact.
const MAX_STORED_MINIMIZERS: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub energy: f64,
    /// Sorted lexicographically; truncated for highly degenerate instances.
    pub minimizers: Vec<Bitstring>,
    pub minimizer_count: u64,
    pub exact: bool,
}

impl GroundStateResult {
    pub fn representative(&self) -> Option<&Bitstring> {
        self.minimizers.first()
    }

    /// Compact JSON form used by the command-line tool.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "energy": self.energy,
            "exact": self.exact,
            "minimizer_count": self.minimizer_count,
            "representative": self.representative().map(|b| b.to_string()),
        })
    }
}

pub fn brute_force(h: &IsingHamiltonian) -> Result<GroundStateResult> {
    brute_force_with_cap(h, DEFAULT_BRUTE_FORCE_CAP)
}

/// Exhaustive ground-state search over all `2^n` states.
///
/// States are visited in Gray-code order so each step flips one spin and the
/// energy is updated from that spin's local field in `O(degree)`.
pub fn brute_force_with_cap(h: &IsingHamiltonian, cap: usize) -> Result<GroundStateResult> {
    let n = h.n();
    if n > cap || n > 63 {
        return Err(Error::Capacity(format!(
            "exhaustive search limited to n <= {cap} (got n = {n}); use simulated annealing instead"
        )));
    }
    let adj = h.adjacency();
    let mut spins = vec![1.0f64; n];
    let mut fields: Vec<f64> = (0..n)
        .map(|i| h.field(i) + adj[i].iter().map(|&(_, w)| w).sum::<f64>())
        .collect();
    let scale: f64 = h.linear().values().chain(h.quadratic().values()).map(|w| w.abs()).sum();
    let tol = 1e-9 * scale.max(1.0);

    let mut energy = h.energy_of_index(0);
    let mut best = energy;
    let mut minimizers = vec![0u64];
    let mut count: u64 = 1;
    let mut gray: u64 = 0;

    for k in 1u64..(1u64 << n) {
        let t = k.trailing_zeros() as usize;
        energy -= 2.0 * spins[t] * fields[t];
        spins[t] = -spins[t];
        for &(j, w) in &adj[t] {
            fields[j] += 2.0 * w * spins[t];
        }
        gray ^= 1 << t;

        if energy < best - tol {
            best = energy;
            minimizers.clear();
            minimizers.push(gray);
            count = 1;
        } else if (energy - best).abs() <= tol {
            if minimizers.len() < MAX_STORED_MINIMIZERS {
                minimizers.push(gray);
            }
            count += 1;
        }
    }

    // Drop incremental rounding drift by re-evaluating the stored states.
    let exact_energies: Vec<f64> = minimizers.iter().map(|&g| h.energy_of_index(g)).collect();
    let energy = exact_energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut states: Vec<Bitstring> = minimizers
        .iter()
        .map(|&g| Bitstring::from_index(g, n))
        .collect();
    states.sort();
    Ok(GroundStateResult {
        energy,
        minimizers: states,
        minimizer_count: count,
        exact: true,
    })
}

/// Linear inverse-temperature ramp for single-spin-flip Metropolis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            sweeps: 1000,
            beta_start: 0.1,
            beta_end: 3.0,
            replicas: 32,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.replicas == 0 {
            return Err(Error::Config("sweeps and replicas must be >= 1".into()));
        }
        if !(self.beta_start > 0.0 && self.beta_end >= self.beta_start) || !self.beta_end.is_finite() {
            return Err(Error::Config(format!(
                "need 0 < beta_start <= beta_end, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    fn beta(&self, sweep: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_start;
        }
        let frac = sweep as f64 / (self.sweeps - 1) as f64;
        self.beta_start + (self.beta_end - self.beta_start) * frac
    }
}

pub fn simulated_annealing(h: &IsingHamiltonian, schedule: &AnnealSchedule) -> Result<Vec<EnergyRecord>> {
    simulated_annealing_from(h, schedule, None)
}

/// Runs one annealing chain per replica and returns each replica's best state.
///
/// Replicas start from `initial` when given, otherwise from a uniformly random
/// state drawn from the replica's own stream.
pub fn simulated_annealing_from(
    h: &IsingHamiltonian,
    schedule: &AnnealSchedule,
    initial: Option<&Bitstring>,
) -> Result<Vec<EnergyRecord>> {
    schedule.validate()?;
    let n = h.n();
    if let Some(x) = initial {
        x.check_len(n)?;
    }
    let adj = h.adjacency();
    let fields_h: Vec<f64> = (0..n).map(|i| h.field(i)).collect();

    (0..schedule.replicas)
        .into_par_iter()
        .map(|replica| {
            let mut rng = seed::stream_rng(schedule.seed, replica as u64);
            let start = match initial {
                Some(x) => x.clone(),
                None => random_bitstring(&mut rng, n),
            };
            let mut spins: Vec<f64> = (0..n).map(|i| start.spin(i)).collect();
            let mut energy = h.energy_unchecked(&start);
            let mut best_energy = energy;
            let mut best = spins.clone();

            for sweep in 0..schedule.sweeps {
                let beta = schedule.beta(sweep);
                for i in 0..n {
                    let local = fields_h[i] + adj[i].iter().map(|&(j, w)| w * spins[j]).sum::<f64>();
                    let delta = -2.0 * spins[i] * local;
                    if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                        spins[i] = -spins[i];
                        energy += delta;
                        if energy < best_energy {
                            best_energy = energy;
                            best.copy_from_slice(&spins);
                        }
                    }
                }
            }
            let x = Bitstring::from_bools(best.iter().map(|&s| s < 0.0));
            EnergyRecord::evaluate(h, x, None)
        })
        .collect()
}

const SAMPLE_CHUNK: usize = 4096;

/// `m` i.i.d. uniform bitstrings with their energies.
pub fn random_sampling(h: &IsingHamiltonian, m: usize, seed: u64) -> Result<Vec<EnergyRecord>> {
    if m == 0 {
        return Err(Error::EmptyInput("random sampling needs m >= 1"));
    }
    let n = h.n();
    let chunks = m.div_ceil(SAMPLE_CHUNK);
    let nested: Vec<Vec<EnergyRecord>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::stream_rng(seed, c as u64);
            let len = SAMPLE_CHUNK.min(m - c * SAMPLE_CHUNK);
            (0..len)
                .map(|_| {
                    let x = random_bitstring(&mut rng, n);
                    let energy = h.energy_unchecked(&x);
                    EnergyRecord {
                        bitstring: x,
                        energy,
                        approximation_ratio: None,
                    }
                })
                .collect()
        })
        .collect();
    Ok(nested.into_iter().flatten().collect())
}

pub fn random_bitstring<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Bitstring {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let word: u64 = rng.gen();
        let take = (n - bits.len()).min(64);
        bits.extend((0..take).map(|k| ((word >> k) & 1) as u8));
    }
    Bitstring::from_bits(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::generate_sk;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn antiferromagnetic_pair() {
        let h = IsingHamiltonian::from_terms(2, [], [((0, 1), 1.0)]).unwrap();
        let gs = brute_force(&h).unwrap();
        assert_eq!(gs.energy, -1.0);
        assert_eq!(gs.minimizers, vec![bs("01"), bs("10")]);
        assert!(gs.exact);
    }

    #[test]
    fn ferromagnetic_pair() {
        let h = IsingHamiltonian::from_terms(2, [], [((0, 1), -1.0)]).unwrap();
        let gs = brute_force(&h).unwrap();
        assert_eq!(gs.energy, -1.0);
        assert_eq!(gs.minimizers, vec![bs("00"), bs("11")]);
    }

    #[test]
    fn capacity_error_above_cap() {
        let h = IsingHamiltonian::empty(30).unwrap();
        assert!(matches!(brute_force(&h), Err(Error::Capacity(_))));
        assert!(matches!(
            brute_force_with_cap(&IsingHamiltonian::empty(6).unwrap(), 5),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn degenerate_count_exact_even_when_truncated() {
        let h = IsingHamiltonian::empty(14).unwrap();
        let gs = brute_force(&h).unwrap();
        assert_eq!(gs.minimizer_count, 1 << 14);
        assert_eq!(gs.minimizers.len(), MAX_STORED_MINIMIZERS);
    }

    #[test]
    fn zero_temperature_fixed_point() {
        let h = generate_sk(10, 4).unwrap();
        let gs = brute_force(&h).unwrap();
        let schedule = AnnealSchedule {
            sweeps: 20,
            beta_start: 1e3,
            beta_end: 1e3,
            replicas: 4,
            seed: 9,
        };
        let start = gs.representative().unwrap();
        let out = simulated_annealing_from(&h, &schedule, Some(start)).unwrap();
        for r in out {
            assert_eq!(r.energy, gs.energy);
        }
    }

    #[test]
    fn annealing_is_deterministic() {
        let h = generate_sk(12, 1).unwrap();
        let s = AnnealSchedule {
            sweeps: 50,
            replicas: 3,
            seed: 5,
            ..Default::default()
        };
        assert_eq!(simulated_annealing(&h, &s).unwrap(), simulated_annealing(&h, &s).unwrap());
    }

    #[test]
    fn bad_schedules_rejected() {
        let h = generate_sk(4, 1).unwrap();
        for s in [
            AnnealSchedule { sweeps: 0, ..Default::default() },
            AnnealSchedule { replicas: 0, ..Default::default() },
            AnnealSchedule { beta_start: 0.0, ..Default::default() },
            AnnealSchedule { beta_start: 2.0, beta_end: 1.0, ..Default::default() },
        ] {
            assert!(matches!(simulated_annealing(&h, &s), Err(Error::Config(_))));
        }
    }

    #[test]
    fn random_sampling_single() {
        let h = IsingHamiltonian::empty(1).unwrap();
        let out = random_sampling(&h, 1, 3).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bitstring.len(), 1);
        assert!(random_sampling(&h, 0, 3).is_err());
    }

    #[test]
    fn random_sampling_spans_chunks_deterministically() {
        let h = generate_sk(6, 2).unwrap();
        let a = random_sampling(&h, SAMPLE_CHUNK + 10, 8).unwrap();
        assert_eq!(a.len(), SAMPLE_CHUNK + 10);
        assert_eq!(a, random_sampling(&h, SAMPLE_CHUNK + 10, 8).unwrap());
    }
}
