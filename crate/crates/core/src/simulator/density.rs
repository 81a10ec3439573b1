use num_complex::Complex64;

use super::{NoiseModel, DENSITY_CAP};
use crate::circuit::{GateList, LogicalOp};
use crate::error::{Error, Result};

type Mat2 = [[Complex64; 2]; 2];

/// Dense `2^n x 2^n` density matrix, row-major.
struct Density {
    dim: usize,
    rho: Vec<Complex64>,
}

impl Density {
    fn plus(n: usize) -> Self {
        let dim = 1usize << n;
        let v = Complex64::new(1.0 / dim as f64, 0.0);
        Density {
            dim,
            rho: vec![v; dim * dim],
        }
    }

    /// `rho -> M rho M^†` for a single-qubit matrix on qubit `q`.
    fn conjugate(&mut self, q: usize, m: &Mat2) {
        let dim = self.dim;
        let bit = 1usize << q;
        // rows: rho -> M rho
        for r0 in (0..dim).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for c in 0..dim {
                let a0 = self.rho[r0 * dim + c];
                let a1 = self.rho[r1 * dim + c];
                self.rho[r0 * dim + c] = m[0][0] * a0 + m[0][1] * a1;
                self.rho[r1 * dim + c] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        // columns: rho -> rho M^†
        for r in 0..dim {
            for c0 in (0..dim).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let a0 = self.rho[r * dim + c0];
                let a1 = self.rho[r * dim + c1];
                self.rho[r * dim + c0] = a0 * m[0][0].conj() + a1 * m[0][1].conj();
                self.rho[r * dim + c1] = a0 * m[1][0].conj() + a1 * m[1][1].conj();
            }
        }
    }

    fn diagonal_phase(&mut self, phase: impl Fn(usize) -> Complex64) {
        let dim = self.dim;
        let d: Vec<Complex64> = (0..dim).map(phase).collect();
        for r in 0..dim {
            for c in 0..dim {
                self.rho[r * dim + c] *= d[r] * d[c].conj();
            }
        }
    }

    /// Amplitude-damping channel `Σ_k K_k rho K_k^†` toward `attractor` on qubit `q`.
    fn amplitude_damping(&mut self, q: usize, gamma: f64, attractor: u8) {
        if gamma == 0.0 {
            return;
        }
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let keep = Complex64::new((1.0 - gamma).sqrt(), 0.0);
        let jump = Complex64::new(gamma.sqrt(), 0.0);
        let (k0, k1): (Mat2, Mat2) = if attractor == 0 {
            ([[one, zero], [zero, keep]], [[zero, jump], [zero, zero]])
        } else {
            ([[keep, zero], [zero, one]], [[zero, zero], [jump, zero]])
        };
        let mut branch = Density {
            dim: self.dim,
            rho: self.rho.clone(),
        };
        self.conjugate(q, &k0);
        branch.conjugate(q, &k1);
        for (a, b) in self.rho.iter_mut().zip(&branch.rho) {
            *a += b;
        }
    }
}

fn rotation(theta: f64, axis_x: bool) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    if axis_x {
        let c = Complex64::new(c, 0.0);
        let s = Complex64::new(0.0, -s);
        [[c, s], [s, c]]
    } else {
        let zero = Complex64::new(0.0, 0.0);
        [
            [Complex64::from_polar(1.0, -theta / 2.0), zero],
            [zero, Complex64::from_polar(1.0, theta / 2.0)],
        ]
    }
}

/// Exact noisy outcome distribution by full density-matrix evolution.
///
/// After every gate each touched qubit passes through an amplitude-damping
/// channel (`gamma_2q` for two-qubit gates, `gamma_1q` otherwise).
pub fn simulate_density_oracle(gl: &GateList, noise: &NoiseModel) -> Result<Vec<f64>> {
    let n = gl.n;
    if n > DENSITY_CAP {
        return Err(Error::Capacity(format!(
            "density-matrix oracle limited to n <= {DENSITY_CAP}, got {n}"
        )));
    }
    noise.validate(n)?;
    let mut rho = Density::plus(n);
    for op in gl.logical_ops() {
        match op {
            LogicalOp::Zz { theta, i, j } => {
                rho.diagonal_phase(|k| {
                    let parity = ((k >> i) ^ (k >> j)) & 1;
                    let sign = if parity == 0 { -1.0 } else { 1.0 };
                    Complex64::from_polar(1.0, sign * theta / 2.0)
                });
                rho.amplitude_damping(i, noise.gamma_2q, noise.attractor.get(i));
                rho.amplitude_damping(j, noise.gamma_2q, noise.attractor.get(j));
            }
            LogicalOp::Rx { theta, q } => {
                rho.conjugate(q, &rotation(theta, true));
                rho.amplitude_damping(q, noise.gamma_1q, noise.attractor.get(q));
            }
            LogicalOp::Rz { theta, q } => {
                rho.conjugate(q, &rotation(theta, false));
                rho.amplitude_damping(q, noise.gamma_1q, noise.attractor.get(q));
            }
        }
    }
    let dim = rho.dim;
    Ok((0..dim).map(|k| rho.rho[k * dim + k].re.max(0.0)).collect())
}
