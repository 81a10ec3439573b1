use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{sample_from_probabilities, NoiseModel, SampleBatch, STATEVECTOR_CAP};
use crate::circuit::{GateList, LogicalOp};
use crate::error::{Error, Result};
use crate::ising::Bitstring;
use crate::seed;

fn check_cap(n: usize) -> Result<()> {
    if n > STATEVECTOR_CAP {
        return Err(Error::Capacity(format!(
            "statevector simulation limited to n <= {STATEVECTOR_CAP}, got {n}"
        )));
    }
    Ok(())
}

fn plus_state(n: usize, amps: &mut Vec<Complex64>) {
    let dim = 1usize << n;
    let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    amps.clear();
    amps.resize(dim, a);
}

/// Calls `f(i0, i1)` for every index pair differing only in bit `q`.
#[inline]
fn for_pairs(dim: usize, q: usize, mut f: impl FnMut(usize, usize)) {
    let stride = 1usize << q;
    let mut block = 0;
    while block < dim {
        for i0 in block..block + stride {
            f(i0, i0 + stride);
        }
        block += stride << 1;
    }
}

/// Calls `f([i00, i01, i10, i11])` over all index quadruples spanned by bits
/// `i` and `j`; the array is indexed by `2 * bit_i + bit_j`.
#[inline]
fn for_quads(dim: usize, i: usize, j: usize, mut f: impl FnMut([usize; 4])) {
    let (lo, hi) = (i.min(j), i.max(j));
    let (ls, hs) = (1usize << lo, 1usize << hi);
    let (mi, mj) = (1usize << i, 1usize << j);
    let mut a = 0;
    while a < dim {
        let mut b = a;
        while b < a + hs {
            for k in b..b + ls {
                f([k, k | mj, k | mi, k | mi | mj]);
            }
            b += ls << 1;
        }
        a += hs << 1;
    }
}

fn zz_phases(theta: f64) -> (Complex64, Complex64) {
    // equal bits: e^{-iθ/2}, different bits: e^{+iθ/2}
    (Complex64::from_polar(1.0, -theta / 2.0), Complex64::from_polar(1.0, theta / 2.0))
}

fn rx_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(theta / 2.0).sin());
    [[c, s], [s, c]]
}

fn apply_unitary(amps: &mut [Complex64], op: &LogicalOp) {
    let dim = amps.len();
    match *op {
        LogicalOp::Zz { theta, i, j } => {
            let (same, diff) = zz_phases(theta);
            let (mi, mj) = (1usize << i, 1usize << j);
            for (k, a) in amps.iter_mut().enumerate() {
                let parity = ((k & mi) != 0) ^ ((k & mj) != 0);
                *a *= if parity { diff } else { same };
            }
        }
        LogicalOp::Rx { theta, q } => {
            let m = rx_matrix(theta);
            for_pairs(dim, q, |i0, i1| {
                let (a0, a1) = (amps[i0], amps[i1]);
                amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                amps[i1] = m[1][0] * a0 + m[1][1] * a1;
            });
        }
        LogicalOp::Rz { theta, q } => {
            let p0 = Complex64::from_polar(1.0, -theta / 2.0);
            let p1 = Complex64::from_polar(1.0, theta / 2.0);
            for_pairs(dim, q, |i0, i1| {
                amps[i0] *= p0;
                amps[i1] *= p1;
            });
        }
    }
}

/// Exact noiseless statevector of `gl` applied to `|+>^n`, logical frame.
pub fn noiseless_state(gl: &GateList) -> Result<Vec<Complex64>> {
    check_cap(gl.n)?;
    let mut amps = Vec::new();
    plus_state(gl.n, &mut amps);
    for op in gl.logical_ops() {
        apply_unitary(&mut amps, &op);
    }
    Ok(amps)
}

/// Exact noiseless outcome probabilities indexed by little-endian bitstring.
pub fn noiseless_probabilities(gl: &GateList) -> Result<Vec<f64>> {
    Ok(noiseless_state(gl)?.iter().map(|a| a.norm_sqr()).collect())
}

/// Evolves once, then draws `shots` computational-basis samples.
pub fn simulate_noiseless(gl: &GateList, shots: usize, seed: u64) -> Result<SampleBatch> {
    let probs = noiseless_probabilities(gl)?;
    Ok(sample_from_probabilities(&probs, gl.n, shots, seed, 0))
}

/// Outcome of one damping event on one qubit.
#[derive(Clone, Copy, Debug)]
enum Branch {
    /// `K0`: the excited component is scaled by `sqrt(1 - γ)`.
    Stay,
    /// `K1`: the excited component is moved onto the attractor bit.
    Jump,
}

#[derive(Clone, Copy)]
struct Damping {
    gamma: f64,
    /// Attractor bit of the qubit; `1 - attractor` is the decaying level.
    attractor: usize,
}

impl Damping {
    fn excited(&self) -> usize {
        1 - self.attractor
    }

    /// Chooses a branch given the excited-level population and returns it
    /// with its probability.
    fn draw<R: Rng>(&self, p_excited: f64, rng: &mut R) -> (Branch, f64) {
        let p_jump = self.gamma * p_excited;
        if rng.gen::<f64>() < p_jump {
            (Branch::Jump, p_jump)
        } else {
            (Branch::Stay, 1.0 - p_jump)
        }
    }

    /// Applies the unnormalised Kraus operator to an amplitude pair indexed by bit.
    #[inline]
    fn apply(&self, branch: Branch, v: &mut [Complex64; 2]) {
        let e = self.excited();
        match branch {
            Branch::Stay => v[e] *= (1.0 - self.gamma).sqrt(),
            Branch::Jump => {
                v[self.attractor] = v[e] * self.gamma.sqrt();
                v[e] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Populations `[p0, p1]` after the unnormalised Kraus operator.
    fn apply_populations(&self, branch: Branch, p: [f64; 2]) -> [f64; 2] {
        let mut out = p;
        let e = self.excited();
        match branch {
            Branch::Stay => out[e] *= 1.0 - self.gamma,
            Branch::Jump => {
                out[self.attractor] = p[e] * self.gamma;
                out[e] = 0.0;
            }
        }
        out
    }
}

struct Trajectory<'a> {
    ops: &'a [LogicalOp],
    noise: &'a NoiseModel,
}

impl Trajectory<'_> {
    fn damping(&self, q: usize, gamma: f64) -> Damping {
        Damping {
            gamma,
            attractor: usize::from(self.noise.attractor.get(q)),
        }
    }

    fn run<R: Rng>(&self, n: usize, amps: &mut Vec<Complex64>, rng: &mut R) -> u64 {
        let split = self.ops.iter().position(|op| matches!(op, LogicalOp::Rx { .. })).unwrap_or(self.ops.len());
        let mut segment = ProductSegment::new(n, self.noise);
        for op in &self.ops[..split] {
            segment.apply(op, rng);
        }
        segment.materialize(amps);
        self.evolve(&self.ops[split..], amps, rng);
        measure(amps, self.noise.attractor.to_index() as usize, rng)
    }

    /// Gate-by-gate evolution of an arbitrary state.
    fn evolve<R: Rng>(&self, ops: &[LogicalOp], amps: &mut [Complex64], rng: &mut R) {
        for op in ops {
            match *op {
                LogicalOp::Zz { theta, i, j } if self.noise.gamma_2q > 0.0 => {
                    self.zz_with_damping(amps, theta, i, j, rng);
                }
                LogicalOp::Rx { theta, q } if self.noise.gamma_1q > 0.0 => {
                    self.rx_with_damping(amps, theta, q, rng);
                }
                LogicalOp::Rz { q, .. } if self.noise.gamma_1q > 0.0 => {
                    apply_unitary(amps, op);
                    self.damp_single(amps, q, rng);
                }
                _ => apply_unitary(amps, op),
            }
        }
    }

    /// Fused phase plus independent damping of both qubits in one sweep.
    ///
    /// The phase is diagonal, so the joint populations of `(i, j)` taken
    /// before it fix both branch probabilities; the second qubit's branch is
    /// drawn conditioned on the first.
    fn zz_with_damping<R: Rng>(&self, amps: &mut [Complex64], theta: f64, i: usize, j: usize, rng: &mut R) {
        let dim = amps.len();
        let mut joint = [[0.0f64; 2]; 2];
        for_quads(dim, i, j, |idx| {
            for (t, &k) in idx.iter().enumerate() {
                joint[t >> 1][t & 1] += amps[k].norm_sqr();
            }
        });

        let gamma = self.noise.gamma_2q;
        let di = self.damping(i, gamma);
        let dj = self.damping(j, gamma);

        let p_exc_i = joint[di.excited()][0] + joint[di.excited()][1];
        let (bi, prob_i) = di.draw(p_exc_i, rng);
        // joint populations after the branch on qubit i, unnormalised
        let col0 = di.apply_populations(bi, [joint[0][0], joint[1][0]]);
        let col1 = di.apply_populations(bi, [joint[0][1], joint[1][1]]);
        let after = [[col0[0], col1[0]], [col0[1], col1[1]]];
        let mass: f64 = after.iter().flatten().sum();
        let p_exc_j = if mass > 0.0 {
            (after[0][dj.excited()] + after[1][dj.excited()]) / mass
        } else {
            0.0
        };
        let (bj, prob_j) = dj.draw(p_exc_j, rng);
        let scale = (prob_i * prob_j).sqrt().recip();

        let (same, diff) = zz_phases(theta);
        for_quads(dim, i, j, |idx| {
            let mut v = [
                amps[idx[0]] * same,
                amps[idx[1]] * diff,
                amps[idx[2]] * diff,
                amps[idx[3]] * same,
            ];
            for bj_val in 0..2 {
                let mut pair = [v[bj_val], v[2 + bj_val]];
                di.apply(bi, &mut pair);
                v[bj_val] = pair[0];
                v[2 + bj_val] = pair[1];
            }
            for bi_val in 0..2 {
                let mut pair = [v[2 * bi_val], v[2 * bi_val + 1]];
                dj.apply(bj, &mut pair);
                v[2 * bi_val] = pair[0];
                v[2 * bi_val + 1] = pair[1];
            }
            for (t, &k) in idx.iter().enumerate() {
                amps[k] = v[t] * scale;
            }
        });
    }

    fn damp_single<R: Rng>(&self, amps: &mut [Complex64], q: usize, rng: &mut R) {
        let d = self.damping(q, self.noise.gamma_1q);
        let e = d.excited();
        let mut p_exc = 0.0;
        for_pairs(amps.len(), q, |i0, i1| {
            p_exc += if e == 1 { amps[i1].norm_sqr() } else { amps[i0].norm_sqr() };
        });
        self.finish_single(amps, q, p_exc, rng);
    }

    /// Rotation and the excited population it leaves in one sweep, then the damping.
    fn rx_with_damping<R: Rng>(&self, amps: &mut [Complex64], theta: f64, q: usize, rng: &mut R) {
        let m = rx_matrix(theta);
        let e = self.damping(q, self.noise.gamma_1q).excited();
        let mut p_exc = 0.0;
        for_pairs(amps.len(), q, |i0, i1| {
            let (a0, a1) = (amps[i0], amps[i1]);
            let b0 = m[0][0] * a0 + m[0][1] * a1;
            let b1 = m[1][0] * a0 + m[1][1] * a1;
            p_exc += if e == 1 { b1.norm_sqr() } else { b0.norm_sqr() };
            amps[i0] = b0;
            amps[i1] = b1;
        });
        self.finish_single(amps, q, p_exc, rng);
    }

    fn finish_single<R: Rng>(&self, amps: &mut [Complex64], q: usize, p_exc: f64, rng: &mut R) {
        let d = self.damping(q, self.noise.gamma_1q);
        let (branch, prob) = d.draw(p_exc, rng);
        let scale = prob.sqrt().recip();
        for_pairs(amps.len(), q, |i0, i1| {
            let mut v = [amps[i0], amps[i1]];
            d.apply(branch, &mut v);
            amps[i0] = v[0] * scale;
            amps[i1] = v[1] * scale;
        });
    }
}

fn spin(bit: usize) -> f64 {
    1.0 - 2.0 * bit as f64
}

/// Trajectory of `|+>^n` through diagonal gates with damping.
///
/// Diagonal phases and damping never correlate populations that start as a
/// product, so branch probabilities follow from per-qubit marginals and the
/// accumulated phase is a quadratic form in the spins of the unpinned qubits.
/// Branches are drawn in the same order and with the same probabilities as
/// gate-by-gate evolution.
struct ProductSegment<'a> {
    n: usize,
    noise: &'a NoiseModel,
    /// Symmetric spin-spin phase coefficients, row-major.
    coupling: Vec<f64>,
    field: Vec<f64>,
    /// Qubits fixed at their attractor bit by a jump or complete decay.
    pinned: Vec<bool>,
    /// Amplitude factor of the excited level of each unpinned qubit.
    weight: Vec<f64>,
    p_excited: Vec<f64>,
}

impl<'a> ProductSegment<'a> {
    fn new(n: usize, noise: &'a NoiseModel) -> Self {
        ProductSegment {
            n,
            noise,
            coupling: vec![0.0; n * n],
            field: vec![0.0; n],
            pinned: vec![false; n],
            weight: vec![1.0; n],
            p_excited: vec![0.5; n],
        }
    }

    fn attractor(&self, q: usize) -> usize {
        usize::from(self.noise.attractor.get(q))
    }

    fn apply<R: Rng>(&mut self, op: &LogicalOp, rng: &mut R) {
        match *op {
            LogicalOp::Zz { theta, i, j } => {
                let c = -theta / 2.0;
                match (self.pinned[i], self.pinned[j]) {
                    (false, false) => {
                        self.coupling[i * self.n + j] += c;
                        self.coupling[j * self.n + i] += c;
                    }
                    (true, false) => self.field[j] += c * spin(self.attractor(i)),
                    (false, true) => self.field[i] += c * spin(self.attractor(j)),
                    (true, true) => {}
                }
                let gamma = self.noise.gamma_2q;
                if gamma > 0.0 {
                    self.damp(i, gamma, rng);
                    self.damp(j, gamma, rng);
                }
            }
            LogicalOp::Rz { theta, q } => {
                if !self.pinned[q] {
                    self.field[q] -= theta / 2.0;
                }
                let gamma = self.noise.gamma_1q;
                if gamma > 0.0 {
                    self.damp(q, gamma, rng);
                }
            }
            LogicalOp::Rx { .. } => unreachable!("rotations end the diagonal segment"),
        }
    }

    fn damp<R: Rng>(&mut self, q: usize, gamma: f64, rng: &mut R) {
        let d = Damping {
            gamma,
            attractor: self.attractor(q),
        };
        let pe = if self.pinned[q] { 0.0 } else { self.p_excited[q] };
        let (branch, _) = d.draw(pe, rng);
        if self.pinned[q] {
            return;
        }
        match branch {
            // every earlier gate saw the excited level of q
            Branch::Jump => self.pin(q, d.excited()),
            Branch::Stay => {
                self.weight[q] *= (1.0 - gamma).sqrt();
                let stay = pe * (1.0 - gamma);
                self.p_excited[q] = stay / (1.0 - gamma * pe);
                if self.weight[q] == 0.0 || self.p_excited[q] == 0.0 {
                    self.pin(q, d.attractor);
                }
            }
        }
    }

    /// Fixes `q` at its attractor, evaluating earlier terms at `past_bit`.
    fn pin(&mut self, q: usize, past_bit: usize) {
        let s = spin(past_bit);
        let n = self.n;
        for b in 0..n {
            let c = self.coupling[q * n + b];
            if c != 0.0 {
                self.field[b] += c * s;
                self.coupling[q * n + b] = 0.0;
                self.coupling[b * n + q] = 0.0;
            }
        }
        self.field[q] = 0.0;
        self.pinned[q] = true;
        self.p_excited[q] = 0.0;
    }

    /// Writes the normalised state, enumerating the unpinned qubits in Gray-code order.
    fn materialize(&self, amps: &mut Vec<Complex64>) {
        let n = self.n;
        amps.clear();
        amps.resize(1usize << n, Complex64::new(0.0, 0.0));
        let free: Vec<usize> = (0..n).filter(|&q| !self.pinned[q]).collect();
        let mut k = (0..n).filter(|&q| self.pinned[q]).map(|q| self.attractor(q) << q).sum::<usize>();
        let norm2: f64 = free.iter().map(|&q| 1.0 + self.weight[q] * self.weight[q]).product();
        let scale = norm2.sqrt().recip();

        // all free bits start at 0, spin +1
        let mut spins = vec![1.0; n];
        let mut local: Vec<f64> = (0..n)
            .map(|q| self.field[q] + free.iter().map(|&b| self.coupling[q * n + b]).sum::<f64>())
            .collect();
        let mut phase: f64 = free
            .iter()
            .map(|&a| self.field[a] + free.iter().filter(|&&b| b > a).map(|&b| self.coupling[a * n + b]).sum::<f64>())
            .sum();
        amps[k] = Complex64::from_polar(scale, phase);
        for g in 1..1usize << free.len() {
            let q = free[g.trailing_zeros() as usize];
            let old = spins[q];
            phase -= 2.0 * old * local[q];
            spins[q] = -old;
            k ^= 1 << q;
            for &b in &free {
                local[b] -= 2.0 * old * self.coupling[b * n + q];
            }
            amps[k] = Complex64::from_polar(scale, phase);
        }
        for &q in &free {
            let w = self.weight[q];
            if w != 1.0 {
                let excited = 1 - self.attractor(q);
                for_pairs(amps.len(), q, |i0, i1| {
                    amps[if excited == 1 { i1 } else { i0 }] *= w;
                });
            }
        }
    }
}

fn measure<R: Rng>(amps: &[Complex64], origin: usize, rng: &mut R) -> u64 {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = origin;
    for u in 0..amps.len() {
        let k = u ^ origin;
        let p = amps[k].norm_sqr();
        if p > 0.0 {
            last = k;
        }
        acc += p;
        if r < acc {
            return k as u64;
        }
    }
    last as u64
}

/// Quantum-trajectory sampling: one stochastic Kraus unravelling per shot.
///
/// Shot `s` uses stream `s` of the root `seed`, so the batch is identical
/// for any number of worker threads.
pub fn simulate_trajectories(gl: &GateList, noise: &NoiseModel, shots: usize, seed: u64) -> Result<SampleBatch> {
    check_cap(gl.n)?;
    noise.validate(gl.n)?;
    let ops = gl.logical_ops();
    let traj = Trajectory { ops: &ops, noise };
    let n = gl.n;
    let bitstrings = (0..shots)
        .into_par_iter()
        .map_init(Vec::new, |amps, shot| {
            let mut rng = seed::stream_rng(seed, shot as u64);
            Bitstring::from_index(traj.run(n, amps, &mut rng), n)
        })
        .collect();
    Ok(SampleBatch {
        shots,
        bitstrings,
        seed,
    })
}

#[cfg(test)]
pub(crate) fn trajectory_norms(gl: &GateList, noise: &NoiseModel, seed: u64) -> Vec<f64> {
    let ops = gl.logical_ops();
    let traj = Trajectory { ops: &ops, noise };
    let mut amps = Vec::new();
    plus_state(gl.n, &mut amps);
    let mut rng = seed::rng(seed);
    let mut norms = Vec::new();
    for op in &ops {
        traj.evolve(std::slice::from_ref(op), &mut amps, &mut rng);
        norms.push(amps.iter().map(|a| a.norm_sqr()).sum());
    }
    norms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_qaoa_circuit, GateOrdering, QaoaParams};
    use crate::ising::{generate_sk, IsingHamiltonian};

    #[test]
    fn plus_state_measures_fair_coin() {
        let shots = 100_000;
        let b = simulate_noiseless(&GateList::empty(1), shots, 4).unwrap();
        let zeros = b.bitstrings.iter().filter(|x| x.get(0) == 0).count() as f64;
        let sigma = (shots as f64 * 0.25).sqrt();
        assert!((zeros - shots as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn zero_angle_qaoa_is_uniform() {
        let h = generate_sk(5, 2).unwrap();
        let gl = build_qaoa_circuit(&h, &QaoaParams::constant(1, 0.0), &GateOrdering::identity(5)).unwrap();
        let probs = noiseless_probabilities(&gl).unwrap();
        assert!(probs.iter().all(|p| (p - 1.0 / 32.0).abs() < 1e-12));
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(
            simulate_noiseless(&GateList::empty(STATEVECTOR_CAP + 1), 1, 0),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn product_segment_matches_gate_by_gate() {
        let h = IsingHamiltonian::from_terms(
            5,
            [(0, 0.7), (3, -0.4)],
            [((0, 1), 1.0), ((1, 2), -1.0), ((0, 4), 0.5), ((2, 3), 1.0), ((3, 4), -1.0), ((1, 4), 1.0)],
        )
        .unwrap();
        let gl = build_qaoa_circuit(&h, &QaoaParams::new(vec![0.8, 0.3], vec![0.4, -0.6]).unwrap(), &GateOrdering::identity(5)).unwrap();
        let ops = gl.logical_ops();
        for (g1, g2) in [(0.1, 0.3), (0.0, 0.5), (0.4, 0.0), (1.0, 1.0)] {
            let noise = NoiseModel::new(5, g1, g2).unwrap().with_attractor("01101".parse().unwrap());
            let traj = Trajectory { ops: &ops, noise: &noise };
            for s in 0..20 {
                let mut fast = Vec::new();
                let mut rng_fast = seed::rng(s);
                let split = ops.iter().position(|op| matches!(op, LogicalOp::Rx { .. })).unwrap();
                let mut seg = ProductSegment::new(5, &noise);
                for op in &ops[..split] {
                    seg.apply(op, &mut rng_fast);
                }
                seg.materialize(&mut fast);

                let mut slow = Vec::new();
                plus_state(5, &mut slow);
                let mut rng_slow = seed::rng(s);
                traj.evolve(&ops[..split], &mut slow, &mut rng_slow);

                assert_eq!(rng_fast.gen::<u64>(), rng_slow.gen::<u64>());
                // equal up to a global phase
                let anchor = (0..32).max_by(|&a, &b| slow[a].norm_sqr().total_cmp(&slow[b].norm_sqr())).unwrap();
                let rel = slow[anchor] / fast[anchor];
                for k in 0..32 {
                    assert!((fast[k] * rel - slow[k]).norm() < 1e-10, "seed {s} index {k}");
                }
            }
        }
    }

    #[test]
    fn norm_preserved_along_noisy_trajectory() {
        let h = generate_sk(6, 3).unwrap();
        let gl = build_qaoa_circuit(&h, &QaoaParams::constant(2, 0.4), &GateOrdering::identity(6)).unwrap();
        let noise = NoiseModel::new(6, 0.2, 0.3).unwrap().with_attractor("101100".parse().unwrap());
        for s in 0..5 {
            for norm in trajectory_norms(&gl, &noise, s) {
                assert!((norm - 1.0).abs() < 1e-10, "norm drifted to {norm}");
            }
        }
    }

    #[test]
    fn full_damping_lands_on_attractor() {
        let h = generate_sk(4, 1).unwrap();
        let gl = build_qaoa_circuit(&h, &QaoaParams::constant(1, 0.3), &GateOrdering::identity(4)).unwrap();
        let attractor: Bitstring = "0110".parse().unwrap();
        let noise = NoiseModel::new(4, 1.0, 1.0).unwrap().with_attractor(attractor.clone());
        let b = simulate_trajectories(&gl, &noise, 200, 5).unwrap();
        assert!(b.bitstrings.iter().all(|x| *x == attractor));
    }

    #[test]
    fn trajectories_deterministic() {
        let h = generate_sk(5, 1).unwrap();
        let gl = build_qaoa_circuit(&h, &QaoaParams::constant(1, 0.3), &GateOrdering::identity(5)).unwrap();
        let noise = NoiseModel::strong(5);
        assert_eq!(
            simulate_trajectories(&gl, &noise, 50, 11).unwrap(),
            simulate_trajectories(&gl, &noise, 50, 11).unwrap()
        );
    }
}
