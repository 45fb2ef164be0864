//! Variational quantum algorithms.
//!
//! A [`ParameterizedCircuit`] is the unitary `U(θ) = U_1(θ_1) ⋯ U_N(θ_N)`
//! with `U_j(θ) = e^{-iθH_j}`, stored in that product order: layer 0 is the
//! leftmost factor and therefore acts **last** on the initial state. The
//! builder method [`ParameterizedCircuit::then`] takes layers in the order
//! they act, which is usually the more convenient way to write an ansatz.
//!
//! The cost is `f(θ) = ⟨ψ₀|U(θ)† M U(θ)|ψ₀⟩`. Its gradient is computed with
//! the parameter-shift rule, so optimizers only ever see cost and gradient
//! values through the [`Objective`] trait.

mod optimize;
pub mod qaoa;
pub mod qml;
pub mod vqe;

pub use optimize::{
    gradient_descent, multi_start, MultiStart, Objective, OptimizerConfig, OptimizerState, Step,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::gates::{Gate, HermitianGenerator, Pauli};
use crate::linalg::{self, c, Matrix, C64};
use crate::measure::{Estimate, Observable};
use crate::state::StateVector;
use crate::{Error, Result};

/// Eigenvalues closer than this count as one when classifying generators.
pub const SPECTRUM_TOLERANCE: f64 = 1e-8;

/// How `f(θ)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Mode {
    /// Exact expectation from the state vector.
    #[default]
    Exact,
    /// Sample mean over `shots` projective measurements.
    Shots { shots: usize },
}

/// A [`Mode`] together with the generator that drives sampling.
#[derive(Debug, Clone)]
pub enum Estimator {
    Exact,
    Shots { shots: usize, rng: crate::Rng },
}

impl Estimator {
    pub fn new(mode: Mode, seed: u64) -> Self {
        match mode {
            Mode::Exact => Estimator::Exact,
            Mode::Shots { shots } => Estimator::Shots {
                shots,
                rng: crate::seeded_rng(seed),
            },
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Estimator::Exact)
    }

    pub fn estimate(&mut self, obs: &Observable, psi: &StateVector) -> Result<Estimate> {
        match self {
            Estimator::Exact => Ok(Estimate {
                estimate: obs.expectation(psi)?,
                stderr: 0.0,
                shots: 0,
            }),
            Estimator::Shots { shots, rng } => obs.estimate_expectation(psi, *shots, rng),
        }
    }

    pub fn expectation(&mut self, obs: &Observable, psi: &StateVector) -> Result<f64> {
        Ok(self.estimate(obs, psi)?.estimate)
    }
}

/// Where a layer's angle comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// Entry `j` of the trainable vector `θ` (0-based).
    Trainable(usize),
    /// Entry `k` of the data vector `x` (0-based).
    Data(usize),
    Fixed(f64),
}

/// Hermitian generator of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Dense generator on a few qubits.
    Local {
        h: HermitianGenerator,
        targets: Vec<usize>,
    },
    /// `coeff · Z_{q1} Z_{q2} ⋯` over the qubits set in `mask`, where bit
    /// `n-1-q` of the mask stands for qubit `q`.
    ZString { mask: usize, coeff: f64 },
}

impl Generator {
    /// `scale · P` for a single-qubit Pauli `P` on `qubit`; `scale = 1/2`
    /// gives the usual rotation gate `R_P(θ)`.
    pub fn pauli(axis: Pauli, qubit: usize, scale: f64) -> Self {
        Generator::Local {
            h: HermitianGenerator::pauli(axis).scaled(scale),
            targets: vec![qubit],
        }
    }

    pub fn local(h: HermitianGenerator, targets: &[usize]) -> Self {
        Generator::Local {
            h,
            targets: targets.to_vec(),
        }
    }

    /// `coeff · Z ⊗ Z ⊗ ⋯` on `qubits` of an `n`-qubit register.
    pub fn z_string(qubits: &[usize], n_qubits: usize, coeff: f64) -> Self {
        let mask = qubits.iter().fold(0, |m, &q| m | 1usize << (n_qubits - 1 - q));
        Generator::ZString { mask, coeff }
    }

    /// Distinct eigenvalues, ascending.
    pub fn distinct_eigenvalues(&self) -> Vec<f64> {
        match self {
            Generator::Local { h, .. } => h.distinct_eigenvalues(SPECTRUM_TOLERANCE),
            Generator::ZString { mask, coeff } => {
                if *mask == 0 || coeff.abs() <= SPECTRUM_TOLERANCE {
                    vec![if *mask == 0 { *coeff } else { 0.0 }]
                } else {
                    vec![-coeff.abs(), coeff.abs()]
                }
            }
        }
    }
}

/// Precomputed data for fast exponentiation of a layer's generator.
#[derive(Debug, Clone, PartialEq)]
enum Spectrum {
    /// `H = c I + r K` with `K² = I`, so `e^{-iθH} = e^{-iθc}(cos θr I - i sin θr K)`.
    TwoLevel { center: f64, radius: f64, k: Matrix },
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Evolve { generator: Generator, slot: Slot },
    /// Fixed gate, e.g. an entangling CNOT.
    Gate { gate: Gate, targets: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
struct Compiled {
    layer: Layer,
    spectrum: Spectrum,
}

impl Compiled {
    fn new(layer: Layer) -> Self {
        let spectrum = match &layer {
            Layer::Evolve {
                generator: Generator::Local { h, .. },
                ..
            } => {
                let values = h.distinct_eigenvalues(SPECTRUM_TOLERANCE);
                if values.len() == 2 {
                    let center = (values[0] + values[1]) / 2.0;
                    let radius = (values[1] - values[0]) / 2.0;
                    let dim = h.matrix().nrows();
                    let k = (h.matrix() - linalg::identity(dim).scale(center)).unscale(radius);
                    Spectrum::TwoLevel { center, radius, k }
                } else {
                    Spectrum::General
                }
            }
            _ => Spectrum::General,
        };
        Self { layer, spectrum }
    }

    fn apply(&self, amps: &mut [C64], n: usize, angle: f64) {
        match (&self.layer, &self.spectrum) {
            (Layer::Gate { gate, targets }, _) => {
                linalg::apply_local(amps, n, targets, gate.matrix());
            }
            (
                Layer::Evolve {
                    generator: Generator::Local { targets, .. },
                    ..
                },
                Spectrum::TwoLevel { center, radius, k },
            ) => {
                let phase = C64::from_polar(1.0, -angle * center);
                let dim = k.nrows();
                let (s, co) = (angle * radius).sin_cos();
                let u = Matrix::from_fn(dim, dim, |r, col| {
                    let id = if r == col { co } else { 0.0 };
                    phase * (c(id, 0.0) - c(0.0, s) * k[(r, col)])
                });
                linalg::apply_local(amps, n, targets, &u);
            }
            (
                Layer::Evolve {
                    generator: Generator::Local { h, targets },
                    ..
                },
                Spectrum::General,
            ) => {
                linalg::apply_local(amps, n, targets, &h.exp_matrix(angle));
            }
            (
                Layer::Evolve {
                    generator: Generator::ZString { mask, coeff },
                    ..
                },
                _,
            ) => {
                let plus = C64::from_polar(1.0, -angle * coeff);
                let minus = plus.conj();
                for (x, a) in amps.iter_mut().enumerate() {
                    *a *= if (x & mask).count_ones() % 2 == 0 { plus } else { minus };
                }
            }
        }
    }
}

/// Parameterized unitary with observable and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedCircuit {
    n_qubits: usize,
    layers: Vec<Compiled>,
    observable: Observable,
    initial: StateVector,
}

impl ParameterizedCircuit {
    /// Empty circuit measuring `observable` on `|0…0⟩`.
    pub fn new(observable: Observable) -> Result<Self> {
        let n = observable.n_qubits();
        Ok(Self {
            n_qubits: n,
            layers: Vec::new(),
            initial: StateVector::zero(n)?,
            observable,
        })
    }

    pub fn with_initial_state(mut self, psi0: StateVector) -> Result<Self> {
        if psi0.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: psi0.n_qubits(),
            });
        }
        self.initial = psi0;
        Ok(self)
    }

    pub fn with_observable(mut self, observable: Observable) -> Result<Self> {
        if observable.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: observable.n_qubits(),
            });
        }
        self.observable = observable;
        Ok(self)
    }

    fn check_layer(&self, layer: &Layer) -> Result<()> {
        match layer {
            Layer::Gate { gate, targets } => gate.check_targets(targets, self.n_qubits),
            Layer::Evolve { generator, slot } => {
                if let Slot::Fixed(v) = slot {
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("fixed angle {v}")));
                    }
                }
                match generator {
                    Generator::Local { h, targets } => {
                        if h.arity() != targets.len() {
                            return Err(Error::InvalidTargets(format!(
                                "{}-qubit generator given {} targets",
                                h.arity(),
                                targets.len()
                            )));
                        }
                        linalg::validate_targets(targets, self.n_qubits)
                    }
                    Generator::ZString { mask, .. } => {
                        if *mask >> self.n_qubits != 0 {
                            return Err(Error::InvalidTargets(format!(
                                "Z-string mask {mask:#b} exceeds {} qubits",
                                self.n_qubits
                            )));
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    /// Adds a layer acting after all existing ones (a new leftmost factor).
    pub fn then(&mut self, layer: Layer) -> Result<&mut Self> {
        self.check_layer(&layer)?;
        self.layers.insert(0, Compiled::new(layer));
        Ok(self)
    }

    /// Adds a layer as the new rightmost factor, acting before all existing ones.
    pub fn factor(&mut self, layer: Layer) -> Result<&mut Self> {
        self.check_layer(&layer)?;
        self.layers.push(Compiled::new(layer));
        Ok(self)
    }

    /// `then(e^{-iθ P/2})` for a rotation about `axis` on `qubit`.
    pub fn rotation(&mut self, axis: Pauli, qubit: usize, slot: Slot) -> Result<&mut Self> {
        self.then(Layer::Evolve {
            generator: Generator::pauli(axis, qubit, 0.5),
            slot,
        })
    }

    pub fn gate(&mut self, gate: Gate, targets: &[usize]) -> Result<&mut Self> {
        self.then(Layer::Gate {
            gate,
            targets: targets.to_vec(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial
    }

    /// Layers in product order (leftmost factor first).
    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().map(|c| &c.layer)
    }

    fn slot_count(&self, pick: impl Fn(&Slot) -> Option<usize>) -> usize {
        self.layers
            .iter()
            .filter_map(|c| match &c.layer {
                Layer::Evolve { slot, .. } => pick(slot),
                Layer::Gate { .. } => None,
            })
            .map(|j| j + 1)
            .max()
            .unwrap_or(0)
    }

    /// `N`, one more than the largest trainable index.
    pub fn n_params(&self) -> usize {
        self.slot_count(|s| match s {
            Slot::Trainable(j) => Some(*j),
            _ => None,
        })
    }

    /// `D`, one more than the largest data index.
    pub fn n_data(&self) -> usize {
        self.slot_count(|s| match s {
            Slot::Data(k) => Some(*k),
            _ => None,
        })
    }

    fn check_lengths(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        if x.len() != self.n_data() {
            return Err(Error::DimensionMismatch {
                expected: self.n_data(),
                found: x.len(),
            });
        }
        if let Some(v) = theta.iter().chain(x).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {v}")));
        }
        Ok(())
    }

    fn run_with(&self, theta: &[f64], x: &[f64], shift: Option<(usize, f64)>) -> StateVector {
        let mut amps = self.initial.amplitudes().to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let angle = match &layer.layer {
                Layer::Evolve { slot, .. } => {
                    let base = match slot {
                        Slot::Trainable(j) => theta[*j],
                        Slot::Data(k) => x[*k],
                        Slot::Fixed(v) => *v,
                    };
                    match shift {
                        Some((at, delta)) if at == idx => base + delta,
                        _ => base,
                    }
                }
                Layer::Gate { .. } => 0.0,
            };
            layer.apply(&mut amps, self.n_qubits, angle);
        }
        StateVector::from_unitary_image(self.n_qubits, amps)
    }

    /// `U(x, θ)|ψ₀⟩`.
    pub fn state(&self, theta: &[f64], x: &[f64]) -> Result<StateVector> {
        self.check_lengths(theta, x)?;
        Ok(self.run_with(theta, x, None))
    }

    /// `f(x, θ)` under `estimator`.
    pub fn evaluate_cost(&self, theta: &[f64], x: &[f64], estimator: &mut Estimator) -> Result<f64> {
        let psi = self.state(theta, x)?;
        let f = estimator.expectation(&self.observable, &psi)?;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("cost {f}")));
        }
        Ok(f)
    }

    /// Half-gap `r` of each trainable layer's two-valued spectrum.
    fn shift_radius(&self, layer: &Compiled) -> Result<f64> {
        match &layer.layer {
            Layer::Evolve { generator, .. } => {
                let values = generator.distinct_eigenvalues();
                if values.len() != 2 {
                    return Err(Error::UnsupportedGenerator(format!(
                        "parameter shift needs exactly two distinct eigenvalues, found {}",
                        values.len()
                    )));
                }
                Ok((values[1] - values[0]) / 2.0)
            }
            Layer::Gate { .. } => unreachable!("fixed gates carry no parameter"),
        }
    }

    /// `∂f/∂θ_j` by the parameter-shift rule.
    ///
    /// For a generator with eigenvalues `c ± r`,
    /// `∂f/∂θ = r [f(θ + π/(4r)) - f(θ - π/(4r))]`, exact for any `θ`. A
    /// parameter shared by several layers receives the sum over those layers.
    pub fn parameter_shift_gradient(
        &self,
        theta: &[f64],
        x: &[f64],
        estimator: &mut Estimator,
    ) -> Result<Vec<f64>> {
        self.check_lengths(theta, x)?;
        let mut grad = vec![0.0; theta.len()];
        for (idx, layer) in self.layers.iter().enumerate() {
            let Layer::Evolve {
                slot: Slot::Trainable(j),
                ..
            } = &layer.layer
            else {
                continue;
            };
            let r = self.shift_radius(layer)?;
            let s = PI / (4.0 * r);
            let plus = self.run_with(theta, x, Some((idx, s)));
            let minus = self.run_with(theta, x, Some((idx, -s)));
            let fp = estimator.expectation(&self.observable, &plus)?;
            let fm = estimator.expectation(&self.observable, &minus)?;
            grad[*j] += r * (fp - fm);
        }
        if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {g}")));
        }
        Ok(grad)
    }
}

/// [`Objective`] for `θ ↦ f(x, θ)` at fixed data `x`.
#[derive(Debug, Clone)]
pub struct CostObjective<'a> {
    pub circuit: &'a ParameterizedCircuit,
    pub data: Vec<f64>,
    pub estimator: Estimator,
}

impl<'a> CostObjective<'a> {
    pub fn new(circuit: &'a ParameterizedCircuit, estimator: Estimator) -> Self {
        Self {
            circuit,
            data: Vec::new(),
            estimator,
        }
    }
}

impl Objective for CostObjective<'_> {
    fn dimension(&self) -> usize {
        self.circuit.n_params()
    }

    fn cost(&mut self, theta: &[f64]) -> Result<f64> {
        self.circuit.evaluate_cost(theta, &self.data, &mut self.estimator)
    }

    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        self.circuit
            .parameter_shift_gradient(theta, &self.data, &mut self.estimator)
    }

    fn is_exact(&self) -> bool {
        self.estimator.is_exact()
    }
}

/// Ansatz of `layers` blocks, each `R_y` and `R_z` on every qubit followed
/// by a chain of CNOTs `(0,1), (1,2), …`, and a closing `R_y`, `R_z` block.
/// Uses `2n(layers + 1)` parameters.
pub fn hardware_efficient(observable: Observable, layers: usize) -> Result<ParameterizedCircuit> {
    let n = observable.n_qubits();
    let mut pc = ParameterizedCircuit::new(observable)?;
    let mut j = 0;
    let mut rotations = |pc: &mut ParameterizedCircuit| -> Result<()> {
        for q in 0..n {
            pc.rotation(Pauli::Y, q, Slot::Trainable(j))?;
            pc.rotation(Pauli::Z, q, Slot::Trainable(j + 1))?;
            j += 2;
        }
        Ok(())
    };
    for _ in 0..layers {
        rotations(&mut pc)?;
        for q in 0..n.saturating_sub(1) {
            pc.gate(crate::gates::cnot(), &[q, q + 1])?;
        }
    }
    rotations(&mut pc)?;
    Ok(pc)
}
