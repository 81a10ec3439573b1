//! Ising cost Hamiltonians, bitflip gauges and approximation ratios.

mod bits;
mod format;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bits::{Bitstring, GaugeMask};
pub use format::{parse_instance, read_instance, serialize_instance, write_instance};

use crate::error::{Error, Result};
use crate::seed;

/// `H = Σ_i h_i Z_i + Σ_{i<j} J_ij Z_i Z_j` over `n` spins.
///
/// Terms are kept in sorted sparse maps. Zero weights are never stored, so
/// two Hamiltonians compare equal exactly when they have the same nonzero
/// terms.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingHamiltonian {
    n: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
}

impl IsingHamiltonian {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("a Hamiltonian needs at least one spin".into()));
        }
        Ok(IsingHamiltonian {
            n,
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
        })
    }

    /// Builds a Hamiltonian from term lists.
    ///
    /// Pairs may be given in either order; `(i, i)` pairs, out-of-range
    /// indices, non-finite weights and repeated keys are rejected.
    pub fn from_terms<L, Q>(n: usize, linear: L, quadratic: Q) -> Result<Self>
    where
        L: IntoIterator<Item = (usize, f64)>,
        Q: IntoIterator<Item = ((usize, usize), f64)>,
    {
        let mut h = Self::empty(n)?;
        for (i, w) in linear {
            h.check_index(i)?;
            check_weight(w)?;
            if h.linear.contains_key(&i) {
                return Err(Error::Config(format!("duplicate linear term {i}")));
            }
            if w != 0.0 {
                h.linear.insert(i, w);
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for ((i, j), w) in quadratic {
            h.check_index(i)?;
            h.check_index(j)?;
            check_weight(w)?;
            if i == j {
                return Err(Error::Config(format!("self-coupling ({i}, {j})")));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::Config(format!("duplicate quadratic term {key:?}")));
            }
            if w != 0.0 {
                h.quadratic.insert(key, w);
            }
        }
        Ok(h)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::Config(format!("index {i} out of range for n = {}", self.n)))
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn field(&self, i: usize) -> f64 {
        self.linear.get(&i).copied().unwrap_or(0.0)
    }

    /// `J_ij` for either index order, zero if absent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.quadratic
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// True when there are no linear terms (global spin-flip symmetric).
    pub fn is_zz_only(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.linear.len() + self.quadratic.len()
    }

    /// Per-site neighbour lists `(j, J_ij)`, used by the incremental solvers.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (&(i, j), &w) in &self.quadratic {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Classical energy `Σ h_i s_i + Σ J_ij s_i s_j` of a bitstring.
    pub fn energy(&self, x: &Bitstring) -> Result<f64> {
        x.check_len(self.n)?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &Bitstring) -> f64 {
        let lin: f64 = self.linear.iter().map(|(&i, &h)| h * x.spin(i)).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|(&(i, j), &w)| w * x.spin(i) * x.spin(j))
            .sum();
        lin + quad
    }

    /// Energy of the basis state with little-endian index `index` (`n <= 64`).
    pub fn energy_of_index(&self, index: u64) -> f64 {
        let spin = |i: usize| if (index >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let lin: f64 = self.linear.iter().map(|(&i, &h)| h * spin(i)).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|(&(i, j), &w)| w * spin(i) * spin(j))
            .sum();
        lin + quad
    }

    /// The bitflip-gauged Hamiltonian `P_y H P_y`.
    ///
    /// `h_i -> (-1)^{y_i} h_i` and `J_ij -> (-1)^{y_i + y_j} J_ij`, so that
    /// `energy(H^y, x) == energy(H, x ^ y)` for every `x`.
    pub fn gauge_transform(&self, y: &Bitstring) -> Result<IsingHamiltonian> {
        y.check_len(self.n)?;
        let sign = |i: usize| if y.get(i) == 1 { -1.0 } else { 1.0 };
        Ok(IsingHamiltonian {
            n: self.n,
            linear: self.linear.iter().map(|(&i, &h)| (i, sign(i) * h)).collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), &w)| ((i, j), sign(i) * sign(j) * w))
                .collect(),
        })
    }

    pub fn gauge_by(&self, g: &GaugeMask) -> Result<IsingHamiltonian> {
        self.gauge_transform(&g.mask)
    }

    /// Hex SHA-256 of the canonical serialized form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(serialize_instance(self).as_bytes()))
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("non-finite weight {w}")))
    }
}

/// Sherrington–Kirkpatrick instance: every pair `i < j` gets an i.i.d.
/// uniform `J_ij ∈ {+1, -1}`, no fields.
pub fn generate_sk(n: usize, seed: u64) -> Result<IsingHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("SK instance needs n >= 2, got {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut quadratic = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            quadratic.insert((i, j), w);
        }
    }
    Ok(IsingHamiltonian {
        n,
        linear: BTreeMap::new(),
        quadratic,
    })
}

/// `E / E_GS` for a minimisation problem with negative ground energy.
pub fn approximation_ratio(energy: f64, ground_energy: f64) -> Result<f64> {
    if ground_energy >= 0.0 || !ground_energy.is_finite() {
        return Err(Error::InvalidReference(ground_energy));
    }
    Ok(energy / ground_energy)
}

/// Hamming weight of a raw sample after undoing the gauge, i.e. in the
/// original problem frame.
pub fn effective_hamming_weight(raw: &Bitstring, gauge: &GaugeMask) -> Result<usize> {
    Ok(raw.xor(&gauge.mask)?.hamming_weight())
}

/// A bitstring with its energy and, when the ground energy is known, its
/// approximation ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub bitstring: Bitstring,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximation_ratio: Option<f64>,
}

impl EnergyRecord {
    pub fn evaluate(h: &IsingHamiltonian, x: Bitstring, ground_energy: Option<f64>) -> Result<Self> {
        let energy = h.energy(&x)?;
        let approximation_ratio = ground_energy
            .map(|e| approximation_ratio(energy, e))
            .transpose()?;
        Ok(EnergyRecord {
            bitstring: x,
            energy,
            approximation_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    fn chain() -> IsingHamiltonian {
        IsingHamiltonian::from_terms(3, [], [((0, 1), 1.0), ((1, 2), -1.0)]).unwrap()
    }

    #[test]
    fn energy_small_cases() {
        assert_eq!(chain().energy(&bs("000")).unwrap(), 0.0);
        let pair = IsingHamiltonian::from_terms(2, [], [((0, 1), 1.0)]).unwrap();
        assert_eq!(pair.energy(&bs("01")).unwrap(), -1.0);
        assert!(matches!(
            pair.energy(&bs("011")),
            Err(Error::Dimension { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn energy_with_fields() {
        let h = IsingHamiltonian::from_terms(2, [(0, 0.5), (1, -2.0)], [((0, 1), 1.5)]).unwrap();
        // s = (+1, -1): 0.5 + 2.0 - 1.5
        assert_eq!(h.energy(&bs("01")).unwrap(), 1.0);
        assert_eq!(h.energy_of_index(0b10), 1.0);
    }

    #[test]
    fn zero_terms_dropped_and_duplicates_rejected() {
        let h = IsingHamiltonian::from_terms(3, [(0, 0.0)], [((1, 0), 0.0), ((1, 2), 2.0)]).unwrap();
        assert_eq!(h.num_terms(), 1);
        assert!(IsingHamiltonian::from_terms(3, [], [((0, 1), 1.0), ((1, 0), 1.0)]).is_err());
        assert!(IsingHamiltonian::from_terms(3, [], [((1, 1), 1.0)]).is_err());
        assert!(IsingHamiltonian::from_terms(3, [(3, 1.0)], []).is_err());
        assert!(IsingHamiltonian::from_terms(3, [(0, f64::NAN)], []).is_err());
    }

    #[test]
    fn identity_gauge_is_noop() {
        let h = chain();
        assert_eq!(h.gauge_transform(&Bitstring::zeros(3)).unwrap(), h);
    }

    #[test]
    fn gauge_to_best_moves_energy_to_zero_state() {
        let h = chain();
        let best = bs("011");
        let hy = h.gauge_transform(&best).unwrap();
        assert_eq!(
            hy.energy(&Bitstring::zeros(3)).unwrap(),
            h.energy(&best).unwrap()
        );
    }

    #[test]
    fn sk_generation() {
        let h = generate_sk(3, 11).unwrap();
        assert_eq!(h.quadratic().len(), 3);
        assert!(h.linear().is_empty());
        assert!(h.quadratic().values().all(|&w| w == 1.0 || w == -1.0));
        assert_eq!(generate_sk(3, 11).unwrap(), h);
        assert_eq!(generate_sk(82, 0).unwrap().quadratic().len(), 3321);
        assert!(matches!(generate_sk(1, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn approximation_ratio_cases() {
        assert_eq!(approximation_ratio(-10.0, -10.0).unwrap(), 1.0);
        assert_eq!(approximation_ratio(0.0, -10.0).unwrap(), 0.0);
        assert_eq!(approximation_ratio(-5.0, -10.0).unwrap(), 0.5);
        assert!(approximation_ratio(3.0, -10.0).unwrap() < 0.0);
        assert!(matches!(
            approximation_ratio(-1.0, 0.0),
            Err(Error::InvalidReference(_))
        ));
    }

    #[test]
    fn effective_hamming() {
        let raw = bs("1100");
        assert_eq!(effective_hamming_weight(&raw, &GaugeMask::identity(4)).unwrap(), 2);
        assert_eq!(effective_hamming_weight(&raw, &GaugeMask::new(raw.clone())).unwrap(), 0);
        assert!(effective_hamming_weight(&raw, &GaugeMask::identity(3)).is_err());
    }

    #[test]
    fn energy_record_ratio() {
        let h = chain();
        let r = EnergyRecord::evaluate(&h, bs("011"), Some(-2.0)).unwrap();
        assert_eq!(r.energy, -2.0);
        assert_eq!(r.approximation_ratio, Some(1.0));
    }
}
