//! QAOA circuits compiled onto a linear qubit chain.
//!
//! The phase separator is realised by a SWAP network: `n` alternating
//! even/odd brick layers of fused `RZZ + SWAP` gates on adjacent chain
//! positions. After one network every logical pair has met exactly once and
//! the chain order is reversed. Gates address physical chain positions; the
//! logical qubit sitting at each position is tracked through the swaps.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingHamiltonian;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let params = QaoaParams { gammas, betas };
        params.validate()?;
        Ok(params)
    }

    /// All angles equal to `value`.
    pub fn constant(p: usize, value: f64) -> Self {
        QaoaParams {
            gammas: vec![value; p],
            betas: vec![value; p],
        }
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.gammas.len() != self.betas.len() {
            return Err(Error::Config(format!(
                "QAOA needs p >= 1 and matching angle counts (got {} gammas, {} betas)",
                self.gammas.len(),
                self.betas.len()
            )));
        }
        Ok(())
    }
}

/// Initial placement of logical qubits on the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOrdering {
    pub ordering_id: usize,
    /// `assignment[logical] = chain position`.
    pub assignment: Vec<usize>,
}

impl GateOrdering {
    pub fn identity(n: usize) -> Self {
        GateOrdering {
            ordering_id: 0,
            assignment: (0..n).collect(),
        }
    }

    pub fn new(ordering_id: usize, assignment: Vec<usize>) -> Result<Self> {
        check_bijection(&assignment)?;
        Ok(GateOrdering {
            ordering_id,
            assignment,
        })
    }
}

fn check_bijection(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Config(format!("{perm:?} is not a permutation")));
        }
    }
    Ok(())
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// One gate on physical chain positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// `exp(-i θ/2 Z⊗Z)` followed by a SWAP of positions `a` and `a + 1`.
    RzzSwap { theta: f64, a: usize, b: usize },
    /// `RX(±π/2)`; `positive` selects the sign.
    RxHalf { positive: bool, q: usize },
    /// `exp(-i θ/2 Z)`.
    Rz { theta: f64, q: usize },
    /// Mixer `exp(-i β X)`.
    Mix { beta: f64, q: usize },
}

impl Gate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::RzzSwap { .. })
    }
}

/// A gate resolved onto logical qubits by replaying the chain permutation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogicalOp {
    /// `exp(-i θ/2 Z_i Z_j)`; the swap is absorbed into the relabelling.
    Zz { theta: f64, i: usize, j: usize },
    /// `exp(-i θ/2 X_q)`.
    Rx { theta: f64, q: usize },
    /// `exp(-i θ/2 Z_q)`.
    Rz { theta: f64, q: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateList {
    pub n: usize,
    pub gates: Vec<Gate>,
    /// Logical → position map before the first gate.
    pub initial: Vec<usize>,
    /// Logical → position map after the last gate.
    pub permutation: Vec<usize>,
}

impl GateList {
    pub fn empty(n: usize) -> Self {
        GateList {
            n,
            gates: Vec::new(),
            initial: (0..n).collect(),
            permutation: (0..n).collect(),
        }
    }

    pub fn count_two_qubit(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Gates translated to logical qubits, in application order.
    pub fn logical_ops(&self) -> Vec<LogicalOp> {
        let mut at = invert(&self.initial);
        self.gates
            .iter()
            .map(|g| match *g {
                Gate::RzzSwap { theta, a, b } => {
                    let op = LogicalOp::Zz {
                        theta,
                        i: at[a],
                        j: at[b],
                    };
                    at.swap(a, b);
                    op
                }
                Gate::RxHalf { positive, q } => LogicalOp::Rx {
                    theta: if positive { FRAC_PI_2 } else { -FRAC_PI_2 },
                    q: at[q],
                },
                Gate::Rz { theta, q } => LogicalOp::Rz { theta, q: at[q] },
                Gate::Mix { beta, q } => LogicalOp::Rx {
                    theta: 2.0 * beta,
                    q: at[q],
                },
            })
            .collect()
    }

    /// Final logical → position map obtained by composing every gate's swap.
    pub fn replay_permutation(&self) -> Vec<usize> {
        let mut at = invert(&self.initial);
        for g in &self.gates {
            if let Gate::RzzSwap { a, b, .. } = *g {
                at.swap(a, b);
            }
        }
        invert(&at)
    }

    /// Line-oriented dump: a `# n <n> initial ...` header, then `GATE θ q0 [q1]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let initial: Vec<String> = self.initial.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "# n {} initial {}", self.n, initial.join(" "));
        for g in &self.gates {
            let _ = match *g {
                Gate::RzzSwap { theta, a, b } => writeln!(out, "RZZ_SWAP {theta} {a} {b}"),
                Gate::RxHalf { positive, q } => {
                    let theta = if positive { FRAC_PI_2 } else { -FRAC_PI_2 };
                    writeln!(out, "RX_HALF {theta} {q}")
                }
                Gate::Rz { theta, q } => writeln!(out, "RZ {theta} {q}"),
                Gate::Mix { beta, q } => writeln!(out, "MIX {beta} {q}"),
            };
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<GateList> {
        let err = |line: usize, message: String| Error::Parse { line, message };
        let mut header: Option<(usize, Vec<usize>)> = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() >= 3 && f[0] == "n" && f[2] == "initial" {
                    let n: usize = f[1].parse().map_err(|_| err(line, "bad qubit count".into()))?;
                    let initial = f[3..]
                        .iter()
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| err(line, "bad initial placement".into()))?;
                    if initial.len() != n {
                        return Err(err(line, "initial placement length differs from n".into()));
                    }
                    check_bijection(&initial).map_err(|e| err(line, e.to_string()))?;
                    header = Some((n, initial));
                }
                continue;
            }
            let (n, _) = header
                .as_ref()
                .ok_or_else(|| err(line, "gate before `# n <n> initial ...` header".into()))?;
            let f: Vec<&str> = t.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(line, format!("bad angle {s:?}")));
            let pos = |s: &str| -> Result<usize> {
                let q: usize = s.parse().map_err(|_| err(line, format!("bad position {s:?}")))?;
                if q >= *n {
                    return Err(err(line, format!("position {q} out of range")));
                }
                Ok(q)
            };
            let gate = match (f[0], f.len()) {
                ("RZZ_SWAP", 4) => {
                    let (a, b) = (pos(f[2])?, pos(f[3])?);
                    if a.abs_diff(b) != 1 {
                        return Err(err(line, format!("positions {a} and {b} are not adjacent")));
                    }
                    Gate::RzzSwap { theta: num(f[1])?, a, b }
                }
                ("RX_HALF", 3) => Gate::RxHalf {
                    positive: num(f[1])? > 0.0,
                    q: pos(f[2])?,
                },
                ("RZ", 3) => Gate::Rz { theta: num(f[1])?, q: pos(f[2])? },
                ("MIX", 3) => Gate::Mix { beta: num(f[1])?, q: pos(f[2])? },
                _ => return Err(err(line, format!("unrecognised gate line {t:?}"))),
            };
            gates.push(gate);
        }
        let (n, initial) = header.ok_or_else(|| err(0, "missing header".into()))?;
        let mut gl = GateList {
            n,
            gates,
            permutation: initial.clone(),
            initial,
        };
        gl.permutation = gl.replay_permutation();
        Ok(gl)
    }
}

struct ChainBuilder<'h> {
    h: &'h IsingHamiltonian,
    /// `at[position] = logical qubit`.
    at: Vec<usize>,
    gates: Vec<Gate>,
}

impl<'h> ChainBuilder<'h> {
    fn new(h: &'h IsingHamiltonian, ordering: &GateOrdering) -> Result<Self> {
        if ordering.assignment.len() != h.n() {
            return Err(Error::dim(h.n(), ordering.assignment.len()));
        }
        check_bijection(&ordering.assignment)?;
        Ok(ChainBuilder {
            h,
            at: invert(&ordering.assignment),
            gates: Vec::new(),
        })
    }

    fn phase_layer(&mut self, gamma: f64) {
        let n = self.h.n();
        let pos_of = invert(&self.at);
        for (&i, &hi) in self.h.linear() {
            self.gates.push(Gate::Rz {
                theta: 2.0 * hi * gamma,
                q: pos_of[i],
            });
        }
        for layer in 0..n {
            let mut a = layer % 2;
            while a + 1 < n {
                let b = a + 1;
                let w = self.h.coupling(self.at[a], self.at[b]);
                self.gates.push(Gate::RzzSwap {
                    theta: 2.0 * w * gamma,
                    a,
                    b,
                });
                self.at.swap(a, b);
                a += 2;
            }
        }
    }

    fn mixer_layer(&mut self, beta: f64) {
        for q in 0..self.h.n() {
            self.gates.push(Gate::Mix { beta, q });
        }
    }

    fn finish(self, initial: Vec<usize>) -> GateList {
        GateList {
            n: self.h.n(),
            gates: self.gates,
            initial,
            permutation: invert(&self.at),
        }
    }
}

/// One phase separator `exp(-i γ H)` as a SWAP network.
///
/// Pairs with zero coupling still get a fused gate (angle 0) so every swap
/// is a real gate application.
pub fn build_phase_network(
    h: &IsingHamiltonian,
    gamma: f64,
    ordering: &GateOrdering,
) -> Result<GateList> {
    let mut b = ChainBuilder::new(h, ordering)?;
    b.phase_layer(gamma);
    Ok(b.finish(ordering.assignment.clone()))
}

/// `∏_l U_M(β_l) U_P(γ_l)`; the `|+>^n` initial state is left to the simulator.
pub fn build_qaoa_circuit(
    h: &IsingHamiltonian,
    params: &QaoaParams,
    ordering: &GateOrdering,
) -> Result<GateList> {
    params.validate()?;
    let mut b = ChainBuilder::new(h, ordering)?;
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        b.phase_layer(gamma);
        b.mixer_layer(beta);
    }
    Ok(b.finish(ordering.assignment.clone()))
}

/// Native-gate cost on an iSWAP / RX(±π/2) / RZ gate set.
///
/// These are upper bounds: a fused RZZ+SWAP is charged 3 iSWAP, 4 RX and
/// 5 RZ; an arbitrary-angle mixer RX is charged 2 RX(±π/2) and 3 RZ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeGateCounts {
    pub iswap: usize,
    pub rx: usize,
    pub rz: usize,
}

impl NativeGateCounts {
    pub fn single_qubit_rotations(&self) -> usize {
        self.rx + self.rz
    }
}

pub fn native_gate_counts(gl: &GateList) -> NativeGateCounts {
    gl.gates.iter().fold(NativeGateCounts::default(), |mut c, g| {
        match g {
            Gate::RzzSwap { .. } => {
                c.iswap += 3;
                c.rx += 4;
                c.rz += 5;
            }
            Gate::Mix { .. } => {
                c.rx += 2;
                c.rz += 3;
            }
            Gate::RxHalf { .. } => c.rx += 1,
            Gate::Rz { .. } => c.rz += 1,
        }
        c
    })
}

/// `k` distinct uniformly random chain placements.
pub fn sample_orderings(n: usize, k: usize, seed: u64) -> Result<Vec<GateOrdering>> {
    if k == 0 {
        return Err(Error::Config("need at least one gate ordering".into()));
    }
    let factorial = (1..=n as u128).try_fold(1u128, |acc, x| acc.checked_mul(x));
    if let Some(f) = factorial {
        if (k as u128) > f {
            return Err(Error::Capacity(format!("{k} distinct orderings requested but n! = {f}")));
        }
    }
    let mut rng = seed::rng(seed);
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        if seen.insert(perm.clone()) {
            out.push(GateOrdering {
                ordering_id: out.len(),
                assignment: perm,
            });
        }
    }
    Ok(out)
}
