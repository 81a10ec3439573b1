//! Noise-directed adaptive remapping (NDAR) for Ising-type binary optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`ising`]: Hamiltonians, bitstrings, bitflip gauges, the instance format.
//! - [`solvers`]: exhaustive ground-state search, simulated annealing, random sampling.
//! - [`circuit`]: QAOA gate lists compiled onto a linear chain with a SWAP network.
//! - [`simulator`]: statevector, density-matrix and quantum-trajectory backends
//!   with amplitude damping toward a configurable attractor.
//! - [`paramopt`]: random, grid and TPE parameter search.
//! - [`remap`]: the adaptive remapping outer loop and its trace.
//! - [`harness`]: experiment configs, studies, statistics and output files.

pub mod circuit;
pub mod error;
pub mod harness;
pub mod ising;
pub mod paramopt;
pub mod remap;
pub mod seed;
pub mod simulator;
pub mod solvers;

pub use error::{Error, Result};
pub use ising::{Bitstring, EnergyRecord, GaugeMask, IsingHamiltonian};
