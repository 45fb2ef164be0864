//! Circuits as ordered gate programs with terminal measurement.

mod format;

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::gates::{self, Gate, GateLabel};
use crate::linalg::{self, Matrix};
use crate::measure::{self, Estimate, Observable};
use crate::noise::NoiseModel;
use crate::state::{format_bits, StateVector};
use crate::{Error, Result};

pub use format::ObservableResolver;

/// Largest register for which dense `2^n × 2^n` unitaries are built.
pub const MAX_DENSE_QUBITS: usize = 10;

/// One gate application.
#[derive(Debug, Clone, PartialEq)]
pub struct Operation {
    pub gate: Gate,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Histogram over eigenvalue indices of the circuit observable.
    #[default]
    Observable,
    /// Histogram over computational-basis bit strings.
    Bitstring,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Operation>,
    observable: Option<Observable>,
    pub noise: NoiseModel,
}

/// Result of a shot-based run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub readout: Readout,
    pub shots: usize,
    /// Keyed by outcome index (observable readout) or bit string.
    pub counts: BTreeMap<String, usize>,
    /// Eigenvalue of each outcome index; empty for bit-string readout.
    pub outcomes: Vec<f64>,
    /// Sample estimate of the observable, when the readout determines it.
    pub estimate: Option<Estimate>,
    pub exact: f64,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("a circuit needs at least one qubit".into()));
        }
        if n_qubits > crate::state::DEFAULT_MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                n: n_qubits,
                max: crate::state::DEFAULT_MAX_QUBITS,
            });
        }
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
            observable: None,
            noise: NoiseModel::default(),
        })
    }

    /// Parses the line-oriented circuit format; see [`Circuit::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        format::parse(text, None)
    }

    /// Like [`Circuit::parse`], resolving `observable <file>` through `resolver`.
    pub fn parse_with(text: &str, resolver: &ObservableResolver<'_>) -> Result<Self> {
        format::parse(text, Some(resolver))
    }

    pub fn to_text(&self) -> String {
        format::write(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, gate: Gate, targets: &[usize]) -> Result<&mut Self> {
        gate.check_targets(targets, self.n_qubits)?;
        self.ops.push(Operation {
            gate,
            targets: targets.to_vec(),
        });
        Ok(self)
    }

    pub fn push_label(&mut self, label: &GateLabel, targets: &[usize]) -> Result<&mut Self> {
        self.push(label.to_gate()?, targets)
    }

    pub fn h(&mut self, q: usize) -> Result<&mut Self> {
        self.push(gates::hadamard(), &[q])
    }

    pub fn x(&mut self, q: usize) -> Result<&mut Self> {
        self.push(gates::pauli(gates::Pauli::X), &[q])
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.push(gates::cnot(), &[control, target])
    }

    pub fn swap(&mut self, a: usize, b: usize) -> Result<&mut Self> {
        self.push(gates::swap(), &[a, b])
    }

    pub fn with_observable(mut self, obs: Observable) -> Result<Self> {
        self.set_observable(obs)?;
        Ok(self)
    }

    pub fn set_observable(&mut self, obs: Observable) -> Result<()> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: obs.n_qubits(),
            });
        }
        self.observable = Some(obs);
        Ok(())
    }

    /// The measured observable, `Z^{⊗n}` unless one was set.
    pub fn observable(&self) -> Result<Cow<'_, Observable>> {
        match &self.observable {
            Some(obs) => Ok(Cow::Borrowed(obs)),
            None => Ok(Cow::Owned(Observable::z_all(self.n_qubits)?)),
        }
    }

    pub fn has_explicit_observable(&self) -> bool {
        self.observable.is_some()
    }

    /// Applies every gate in order to `psi0`.
    pub fn run_statevector(&self, psi0: &StateVector) -> Result<StateVector> {
        self.check_state(psi0.n_qubits())?;
        let mut amps = psi0.amplitudes().to_vec();
        for op in &self.ops {
            linalg::apply_local(&mut amps, self.n_qubits, &op.targets, op.gate.matrix());
        }
        Ok(StateVector::from_unitary_image(self.n_qubits, amps))
    }

    /// Runs from `|0…0⟩`.
    pub fn run(&self) -> Result<StateVector> {
        self.run_statevector(&StateVector::zero(self.n_qubits)?)
    }

    /// Noiseless density-matrix evolution `ρ ↦ U ρ U†`, gate by gate.
    pub fn run_density(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_state(rho0.n_qubits())?;
        self.ops
            .iter()
            .try_fold(rho0.clone(), |rho, op| rho.apply_gate_on(&op.gate, &op.targets))
    }

    /// Exact `⟨ψ₀|U† M U|ψ₀⟩`.
    pub fn expectation(&self, psi0: &StateVector) -> Result<f64> {
        self.observable()?.expectation(&self.run_statevector(psi0)?)
    }

    /// Samples `shots` terminal measurements of the evolved state.
    ///
    /// Evolution is deterministic, so the state is computed once and each
    /// shot is an independent draw from its outcome distribution.
    pub fn run_and_measure<R: Rng + ?Sized>(
        &self,
        psi0: &StateVector,
        shots: usize,
        readout: Readout,
        rng: &mut R,
    ) -> Result<ShotResult> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        let psi = self.run_statevector(psi0)?;
        let obs = self.observable()?;
        let exact = obs.expectation(&psi)?;
        let outcome_probs: Vec<f64> = match readout {
            Readout::Observable => obs.outcome_probabilities(&psi)?.into_iter().map(|(_, p)| p).collect(),
            Readout::Bitstring => psi.probabilities(),
        };
        Ok(self.sample(&obs, &outcome_probs, exact, shots, readout, rng))
    }

    /// As [`Circuit::run_and_measure`], but evolving the density matrix
    /// `rho0` under the circuit's noise model.
    pub fn run_and_measure_noisy<R: Rng + ?Sized>(
        &self,
        rho0: &DensityMatrix,
        shots: usize,
        readout: Readout,
        rng: &mut R,
    ) -> Result<ShotResult> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        let rho = crate::noise::run_noisy(self, rho0)?;
        let obs = self.observable()?;
        let exact = rho.expectation(&obs)?;
        let outcome_probs: Vec<f64> = match readout {
            Readout::Observable => rho.measure_probabilities(&obs)?.into_iter().map(|(_, p)| p).collect(),
            Readout::Bitstring => rho.matrix().diagonal().iter().map(|d| d.re.max(0.0)).collect(),
        };
        Ok(self.sample(&obs, &outcome_probs, exact, shots, readout, rng))
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        obs: &Observable,
        probs: &[f64],
        exact: f64,
        shots: usize,
        readout: Readout,
        rng: &mut R,
    ) -> ShotResult {
        let counts = measure::sample_counts(probs, shots, rng);
        let (estimate, outcomes) = match readout {
            Readout::Observable => (
                Some(measure::estimate_from_counts(obs.eigenvalues(), &counts)),
                obs.eigenvalues().to_vec(),
            ),
            Readout::Bitstring => (
                obs.diagonal_values().map(|diag| measure::estimate_from_counts(diag, &counts)),
                Vec::new(),
            ),
        };
        let key = |i: usize| match readout {
            Readout::Observable => i.to_string(),
            Readout::Bitstring => format_bits(i, self.n_qubits),
        };
        ShotResult {
            readout,
            shots,
            counts: counts
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(|(i, &n)| (key(i), n))
                .collect(),
            outcomes,
            estimate,
            exact,
        }
    }

    /// Full circuit unitary, the product of embedded gates with the first
    /// operation rightmost.
    pub fn unitary_of(&self) -> Result<Gate> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::RegisterTooLarge {
                n: self.n_qubits,
                max: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1 << self.n_qubits;
        let mut u = linalg::identity(dim);
        // Apply each gate to every column of the running product.
        for op in &self.ops {
            for col in 0..dim {
                let mut column: Vec<_> = u.column(col).iter().copied().collect();
                linalg::apply_local(&mut column, self.n_qubits, &op.targets, op.gate.matrix());
                u.set_column(col, &nalgebra::DVector::from_vec(column));
            }
        }
        Gate::new(GateLabel::Custom("circuit".into()), u)
    }

    /// Circuit implementing `U†`.
    pub fn inverse(&self) -> Circuit {
        let mut out = self.clone();
        out.ops = self
            .ops
            .iter()
            .rev()
            .map(|op| Operation {
                gate: op.gate.dagger(),
                targets: op.targets.clone(),
            })
            .collect();
        out
    }

    /// Unitary folding: every gate `U` becomes `U (U† U)^k` with
    /// `factor = 2k + 1`. The logical unitary is unchanged while per-gate
    /// noise is applied `factor` times.
    pub fn fold(&self, factor: usize) -> Result<Circuit> {
        if factor == 0 || factor % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "fold factor must be an odd positive integer, got {factor}"
            )));
        }
        let mut out = self.clone();
        out.ops.clear();
        for op in &self.ops {
            out.ops.push(op.clone());
            for _ in 0..factor / 2 {
                out.ops.push(Operation {
                    gate: op.gate.dagger(),
                    targets: op.targets.clone(),
                });
                out.ops.push(op.clone());
            }
        }
        Ok(out)
    }

    fn check_state(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: n,
            });
        }
        Ok(())
    }
}

/// Quantum Fourier transform on `n` qubits.
///
/// Hadamards and controlled phase rotations `R_k = diag(1, e^{2πi/2^k})`
/// (controlled-`S` for `k = 2`, controlled-`T` for `k = 3`), followed by
/// explicit SWAPs reversing the qubit order. The unitary equals the DFT
/// matrix `(1/√N)[e^{2πi jk/N}]` with qubit 0 as the most significant bit.
pub fn qft(n_qubits: usize) -> Result<Circuit> {
    if !(1..=MAX_DENSE_QUBITS).contains(&n_qubits) {
        return Err(Error::InvalidArgument(format!(
            "qft needs 1 ≤ n ≤ {MAX_DENSE_QUBITS}, got {n_qubits}"
        )));
    }
    let mut c = Circuit::new(n_qubits)?;
    for target in 0..n_qubits {
        c.h(target)?;
        for control in target + 1..n_qubits {
            let k = (control - target + 1) as u32;
            let rk = match k {
                2 => gates::phase_s(),
                3 => gates::phase_t(),
                _ => gates::phase_r(k)?,
            };
            c.push(gates::controlled(&rk)?, &[control, target])?;
        }
    }
    for q in 0..n_qubits / 2 {
        c.swap(q, n_qubits - 1 - q)?;
    }
    Ok(c)
}

/// Dense DFT matrix `(1/√N)[e^{2πi jk/N}]`, `N = 2^n`.
pub fn dft_matrix(n_qubits: usize) -> Matrix {
    let dim = 1usize << n_qubits;
    let norm = 1.0 / (dim as f64).sqrt();
    Matrix::from_fn(dim, dim, |j, k| {
        let angle = 2.0 * std::f64::consts::PI * ((j * k) % dim) as f64 / dim as f64;
        crate::linalg::C64::from_polar(norm, angle)
    })
}
