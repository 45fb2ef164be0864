//! Desk-scale simulation of gate-based quantum computers.
//!
//! State-vector and density-matrix engines, projective measurement, noise
//! channels, the three-qubit and Shor codes, zero-noise extrapolation, and
//! variational algorithms trained with parameter-shift gradients.
//!
//! Qubit 0 is the most significant bit of a basis index everywhere: the
//! basis state `|q0 q1 … q(n-1)⟩` has index `Σ q_k 2^(n-1-k)`.

pub mod circuit;
pub mod density;
mod error;
pub mod gates;
pub mod linalg;
pub mod measure;
pub mod noise;
pub mod qec;
pub mod qem;
pub mod state;
pub mod vqa;

pub use circuit::{qft, Circuit, Operation, Readout, ShotResult};
pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use gates::{Gate, GateLabel, HermitianGenerator, Pauli};
pub use measure::{Estimate, Observable};
pub use noise::{KrausChannel, NoiseModel, NoiseSpec};
pub use state::{BellState, BlochCoordinates, StateVector};

use rand::SeedableRng;

/// Random number generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Deterministic generator for `seed`.
pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/qec.md")]
    mod qec {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/zne.md")]
    mod zne {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
