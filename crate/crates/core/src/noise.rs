//! Error channels on density matrices and coherent over-rotation of gates.
//!
//! Probability conventions differ between channels and follow the usual
//! textbook presentation:
//!
//! * [`bit_flip`] and [`phase_flip`] take `p`, the probability that the
//!   qubit is left **untouched**; the flip happens with probability `1 - p`.
//! * [`depolarizing`] takes `p`, the probability that the qubit is replaced
//!   by the maximally mixed state: `ρ ↦ (p/2) I + (1 - p) ρ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::density::DensityMatrix;
use crate::gates::{self, Gate, GateLabel, HermitianGenerator, Pauli};
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Tolerance on `Σ E_j† E_j = I`.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-10;

/// Trace-preserving quantum operation `ρ ↦ Σ_j E_j ρ E_j†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    label: String,
    operators: Vec<Matrix>,
}

impl KrausChannel {
    pub fn new(label: impl Into<String>, operators: Vec<Matrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidArgument("a channel needs at least one operator".into()))?;
        let dim = first.nrows();
        if linalg::qubits_for_dim(dim).filter(|&k| k >= 1).is_none() {
            return Err(Error::InvalidArgument("Kraus operators must be 2^k × 2^k".into()));
        }
        for e in &operators {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.nrows().max(e.ncols()),
                });
            }
        }
        let channel = Self {
            label: label.into(),
            operators,
        };
        let deviation = channel.completeness_deviation();
        if !(deviation < COMPLETENESS_TOLERANCE) {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(channel)
    }

    pub fn identity(arity: usize) -> Self {
        Self {
            label: "identity".into(),
            operators: vec![linalg::identity(1 << arity)],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operators(&self) -> &[Matrix] {
        &self.operators
    }

    pub fn arity(&self) -> usize {
        self.operators[0].nrows().trailing_zeros() as usize
    }

    /// Frobenius distance of `Σ E_j† E_j` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.operators[0].nrows();
        let sum = self
            .operators
            .iter()
            .fold(Matrix::zeros(dim, dim), |acc, e| acc + e.adjoint() * e);
        linalg::frobenius_distance(&sum, &linalg::identity(dim))
    }

    /// `Σ_j Ẽ_j ρ Ẽ_j†` with each `E_j` acting on `targets`.
    pub fn apply(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        if targets.len() != self.arity() {
            return Err(Error::InvalidTargets(format!(
                "{}-qubit channel given {} targets",
                self.arity(),
                targets.len()
            )));
        }
        linalg::validate_targets(targets, rho.n_qubits())?;
        Ok(rho.apply_operators(&self.operators, targets))
    }

    /// Applies a single-qubit channel independently to each listed qubit.
    pub fn apply_each(&self, rho: &DensityMatrix, qubits: &[usize]) -> Result<DensityMatrix> {
        qubits
            .iter()
            .try_fold(rho.clone(), |acc, &q| self.apply(&acc, &[q]))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

fn pauli_mixture(label: &str, p: f64, which: Pauli) -> Result<KrausChannel> {
    check_probability(p)?;
    Ok(KrausChannel {
        label: format!("{label}({p})"),
        operators: vec![
            linalg::identity(2).scale(p.sqrt()),
            which.matrix().scale((1.0 - p).sqrt()),
        ],
    })
}

/// `E_0 = √p I`, `E_1 = √(1-p) X`: no error with probability `p`.
pub fn bit_flip(p: f64) -> Result<KrausChannel> {
    pauli_mixture("bitflip", p, Pauli::X)
}

/// `E_0 = √p I`, `E_1 = √(1-p) Z`: no error with probability `p`.
pub fn phase_flip(p: f64) -> Result<KrausChannel> {
    pauli_mixture("phaseflip", p, Pauli::Z)
}

/// `ρ ↦ (p/2) I + (1-p) ρ`, with Kraus operators
/// `√(1-3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z`.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability(p)?;
    let q = (p / 4.0).sqrt();
    Ok(KrausChannel {
        label: format!("depolarizing({p})"),
        operators: vec![
            linalg::identity(2).scale((1.0 - 0.75 * p).sqrt()),
            Pauli::X.matrix().scale(q),
            Pauli::Y.matrix().scale(q),
            Pauli::Z.matrix().scale(q),
        ],
    })
}

pub fn apply_channel(
    channel: &KrausChannel,
    rho: &DensityMatrix,
    targets: &[usize],
) -> Result<DensityMatrix> {
    channel.apply(rho, targets)
}

/// Over-rotation `Ũ(ε) = e^{-i(1+ε)H}` of the gate `U = e^{-iH}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentControlError {
    pub epsilon: f64,
    pub generator: HermitianGenerator,
}

impl CoherentControlError {
    pub fn new(generator: HermitianGenerator, epsilon: f64) -> Self {
        Self { epsilon, generator }
    }

    pub fn ideal(&self) -> Result<Gate> {
        self.generator.exp(1.0)
    }

    pub fn unitary(&self) -> Result<Gate> {
        perturbed_gate(&self.generator, self.epsilon)
    }

    pub fn fidelity_lower_bound(&self) -> f64 {
        fidelity_lower_bound(&self.generator, self.epsilon)
    }
}

/// `e^{-i(1+ε)h}`.
pub fn perturbed_gate(h: &HermitianGenerator, epsilon: f64) -> Result<Gate> {
    h.exp(1.0 + epsilon)
}

/// `1 - ‖h‖² ε² / 2` with the spectral norm; negative values are a vacuous bound.
pub fn fidelity_lower_bound(h: &HermitianGenerator, epsilon: f64) -> f64 {
    let norm = h.spectral_norm();
    1.0 - norm * norm * epsilon * epsilon / 2.0
}

/// Bound for a sequence of over-rotated gates `Ũ_j = e^{-i(1+ε_j)H_j}`.
///
/// The state error is at most `Σ_j ‖H_j‖ |ε_j| ≤ (Σ_j ‖H_j‖) ‖ε‖_∞`, which
/// gives `1 - (Σ_j ‖H_j‖)² ‖ε‖²_∞ / 2`. For one gate this is
/// [`fidelity_lower_bound`].
pub fn circuit_fidelity_lower_bound(gates: &[(&HermitianGenerator, f64)]) -> f64 {
    let norm: f64 = gates.iter().map(|(h, _)| h.spectral_norm()).sum();
    let eps = gates.iter().fold(0.0, |m: f64, (_, e)| m.max(e.abs()));
    1.0 - norm * norm * eps * eps / 2.0
}

/// Over-rotated version of a gate: rotation angles are multiplied by
/// `1 + ε`, including rotations under a control. Other gates are returned
/// unchanged.
pub fn over_rotate(gate: &Gate, epsilon: f64) -> Result<Gate> {
    fn scale(label: &GateLabel, factor: f64) -> Option<GateLabel> {
        match label {
            GateLabel::Rx(t) => Some(GateLabel::Rx(t * factor)),
            GateLabel::Ry(t) => Some(GateLabel::Ry(t * factor)),
            GateLabel::Rz(t) => Some(GateLabel::Rz(t * factor)),
            GateLabel::Controlled(inner) => {
                scale(inner, factor).map(|l| GateLabel::Controlled(Box::new(l)))
            }
            _ => None,
        }
    }
    if epsilon == 0.0 {
        return Ok(gate.clone());
    }
    match scale(gate.label(), 1.0 + epsilon) {
        Some(label) => label.to_gate(),
        None => Ok(gate.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    BitFlip,
    PhaseFlip,
    Depolarizing,
}

impl ChannelKind {
    pub fn channel(self, p: f64) -> Result<KrausChannel> {
        match self {
            ChannelKind::BitFlip => bit_flip(p),
            ChannelKind::PhaseFlip => phase_flip(p),
            ChannelKind::Depolarizing => depolarizing(p),
        }
    }

    /// Probability that an error occurs, given the channel parameter.
    pub fn error_probability(self, p: f64) -> f64 {
        match self {
            ChannelKind::BitFlip | ChannelKind::PhaseFlip => 1.0 - p,
            ChannelKind::Depolarizing => p,
        }
    }

    /// Inverse of [`ChannelKind::error_probability`].
    pub fn parameter_for_error(self, e: f64) -> f64 {
        match self {
            ChannelKind::BitFlip | ChannelKind::PhaseFlip => 1.0 - e,
            ChannelKind::Depolarizing => e,
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::BitFlip => "bitflip",
            ChannelKind::PhaseFlip => "phaseflip",
            ChannelKind::Depolarizing => "depolarizing",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bitflip" | "bit_flip" => Ok(ChannelKind::BitFlip),
            "phaseflip" | "phase_flip" => Ok(ChannelKind::PhaseFlip),
            "depolarizing" | "depolarize" => Ok(ChannelKind::Depolarizing),
            other => Err(Error::InvalidArgument(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitSet {
    #[default]
    All,
    List(Vec<usize>),
}

impl QubitSet {
    pub fn resolve(&self, n_qubits: usize) -> Vec<usize> {
        match self {
            QubitSet::All => (0..n_qubits).collect(),
            QubitSet::List(qs) => qs.clone(),
        }
    }

    pub fn contains(&self, q: usize) -> bool {
        match self {
            QubitSet::All => true,
            QubitSet::List(qs) => qs.contains(&q),
        }
    }
}

/// Where a channel acts in the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// After every gate, on each of its targets that lies in the qubit set.
    #[default]
    Each,
    /// Once, after the last gate, on every qubit of the set.
    End,
}

/// One single-qubit channel applied per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: ChannelKind,
    pub p: f64,
    #[serde(default)]
    pub qubits: QubitSet,
    #[serde(default)]
    pub placement: Placement,
}

impl NoiseSpec {
    pub fn new(kind: ChannelKind, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(Self {
            kind,
            p,
            qubits: QubitSet::All,
            placement: Placement::Each,
        })
    }

    pub fn on(mut self, qubits: QubitSet) -> Self {
        self.qubits = qubits;
        self
    }

    pub fn at(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        self.kind.channel(self.p)
    }

    pub fn is_trivial(&self) -> bool {
        self.kind.error_probability(self.p) == 0.0
    }
}

/// Incoherent channels plus an optional coherent over-rotation of every
/// parameterized gate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub channels: Vec<NoiseSpec>,
    #[serde(default)]
    pub cce_epsilon: f64,
}

/// A noise model at amplified strength, with notes on any probabilities that
/// had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledNoise {
    pub model: NoiseModel,
    pub warnings: Vec<String>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_channel(mut self, spec: NoiseSpec) -> Self {
        self.channels.push(spec);
        self
    }

    pub fn with_cce(mut self, epsilon: f64) -> Self {
        self.cce_epsilon = epsilon;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.cce_epsilon == 0.0 && self.channels.iter().all(NoiseSpec::is_trivial)
    }

    /// Multiplies every error probability and the over-rotation by `lambda`.
    ///
    /// For bit and phase flips the no-error probability `p` becomes
    /// `1 - λ(1 - p)`; for depolarizing `p` becomes `λp`. Results outside
    /// `[0, 1]` are clamped and reported.
    pub fn scaled(&self, lambda: f64) -> Result<ScaledNoise> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise scale must be finite and non-negative, got {lambda}"
            )));
        }
        let mut warnings = Vec::new();
        let channels = self
            .channels
            .iter()
            .map(|spec| {
                let e = lambda * spec.kind.error_probability(spec.p);
                let clamped = e.clamp(0.0, 1.0);
                if clamped != e {
                    warnings.push(format!(
                        "{} error probability {e} at scale {lambda} clamped to {clamped}",
                        spec.kind
                    ));
                }
                NoiseSpec {
                    p: spec.kind.parameter_for_error(clamped),
                    ..spec.clone()
                }
            })
            .collect();
        Ok(ScaledNoise {
            model: NoiseModel {
                channels,
                cce_epsilon: lambda * self.cce_epsilon,
            },
            warnings,
        })
    }
}

/// Density-matrix execution of `circuit` under its attached noise model.
pub fn run_noisy(circuit: &Circuit, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    run_with_model(circuit, rho0, &circuit.noise)
}

/// Density-matrix execution of `circuit` under `model`, ignoring the
/// circuit's own noise model.
pub fn run_with_model(
    circuit: &Circuit,
    rho0: &DensityMatrix,
    model: &NoiseModel,
) -> Result<DensityMatrix> {
    let n = circuit.n_qubits();
    if rho0.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.n_qubits(),
        });
    }
    let channels: Vec<(KrausChannel, &NoiseSpec)> = model
        .channels
        .iter()
        .filter(|s| !s.is_trivial())
        .map(|s| Ok((s.channel()?, s)))
        .collect::<Result<_>>()?;
    for (_, spec) in &channels {
        if let QubitSet::List(qs) = &spec.qubits {
            linalg::validate_targets(qs, n)?;
        }
    }
    let mut rho = rho0.clone();
    for op in circuit.ops() {
        let gate = over_rotate(&op.gate, model.cce_epsilon)?;
        rho = rho.apply_gate_on(&gate, &op.targets)?;
        for (channel, spec) in channels.iter().filter(|(_, s)| s.placement == Placement::Each) {
            for &q in op.targets.iter().filter(|&&q| spec.qubits.contains(q)) {
                rho = channel.apply(&rho, &[q])?;
            }
        }
    }
    for (channel, spec) in channels.iter().filter(|(_, s)| s.placement == Placement::End) {
        rho = channel.apply_each(&rho, &spec.qubits.resolve(n))?;
    }
    Ok(rho)
}

/// Fixed single-qubit rotation by `theta` about `axis`, returned as a
/// generator-based coherent error pair `(U, Ũ)`.
pub fn rotation_with_error(axis: Pauli, theta: f64, epsilon: f64) -> Result<(Gate, Gate)> {
    let h = HermitianGenerator::pauli(axis).scaled(theta / 2.0);
    Ok((gates::from_generator(&h, 1.0)?, perturbed_gate(&h, epsilon)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};
    use crate::measure::Observable;
    use crate::state::StateVector;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rho(bits: &str) -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::from_bits(bits).unwrap()).unwrap()
    }

    fn pure(psi: &StateVector) -> DensityMatrix {
        DensityMatrix::from_pure(psi).unwrap()
    }

    fn diag(values: &[f64]) -> Matrix {
        Matrix::from_fn(values.len(), values.len(), |r, col| {
            if r == col {
                c(values[r], 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    #[test]
    fn bit_flip_examples() {
        let zero = rho("0");
        assert_eq!(bit_flip(1.0).unwrap().apply(&zero, &[0]).unwrap(), zero);
        let out = bit_flip(0.0).unwrap().apply(&zero, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), rho("1").matrix()) < 1e-15);
        let out = bit_flip(0.75).unwrap().apply(&zero, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.75, 0.25])) < 1e-15);
        assert!(bit_flip(1.5).is_err());
        assert!(bit_flip(f64::NAN).is_err());
    }

    #[test]
    fn phase_flip_examples() {
        let plus = pure(&StateVector::plus());
        assert_eq!(phase_flip(1.0).unwrap().apply(&plus, &[0]).unwrap(), plus);
        let out = phase_flip(0.0).unwrap().apply(&plus, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), pure(&StateVector::minus()).matrix()) < 1e-15);
        let out = phase_flip(0.5).unwrap().apply(&plus, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn depolarizing_examples() {
        let zero = rho("0");
        let out = depolarizing(0.0).unwrap().apply(&zero, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), zero.matrix()) < 1e-15);
        let psi = StateVector::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let out = depolarizing(1.0).unwrap().apply(&pure(&psi), &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.5, 0.5])) < 1e-15);
        let out = depolarizing(0.5).unwrap().apply(&zero, &[0]).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.75, 0.25])) < 1e-15);
    }

    #[test]
    fn channel_on_second_qubit() {
        let out = bit_flip(0.9).unwrap().apply(&rho("00"), &[1]).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.9, 0.1, 0.0, 0.0])) < 1e-15);
        let id = KrausChannel::identity(1);
        assert_eq!(id.apply(&rho("01"), &[0]).unwrap(), rho("01"));
        assert!(id.apply(&rho("01"), &[2]).is_err());
        assert!(id.apply(&rho("01"), &[0, 1]).is_err());
    }

    #[test]
    fn rejects_incomplete_kraus_sets() {
        let half = linalg::identity(2).scale(0.5);
        assert!(matches!(
            KrausChannel::new("half", vec![half]),
            Err(Error::NotTracePreserving { .. })
        ));
        assert!(KrausChannel::new("none", vec![]).is_err());
    }

    #[test]
    fn perturbed_gate_examples() {
        let h = HermitianGenerator::pauli(Pauli::Y).scaled(PI / 4.0);
        let exact = perturbed_gate(&h, 0.0).unwrap();
        assert!(max_abs_diff(exact.matrix(), &h.exp_matrix(1.0)) < 1e-15);

        let over = perturbed_gate(&h, 0.25).unwrap();
        let target = gates::rotation(Pauli::Y, PI / 2.0 + PI / 8.0).unwrap();
        assert!(max_abs_diff(over.matrix(), target.matrix()) < 1e-12);

        let none = perturbed_gate(&h, -1.0).unwrap();
        assert!(max_abs_diff(none.matrix(), &linalg::identity(2)) < 1e-15);
    }

    #[test]
    fn fidelity_bound_example() {
        let h = HermitianGenerator::pauli(Pauli::Y).scaled(PI / 4.0);
        // An extra R_y(π/8) after R_y(π/2) is a 25% over-rotation.
        let eps = 0.25;
        let bound = fidelity_lower_bound(&h, eps);
        assert!((bound - (1.0 - (PI / 4.0).powi(2) * eps * eps / 2.0)).abs() < 1e-15);
        assert!((bound - 0.980_723).abs() < 1e-6);
        let zero = StateVector::zero(1).unwrap();
        let ideal = h.exp(1.0).unwrap().apply(&zero).unwrap();
        let noisy = perturbed_gate(&h, eps).unwrap().apply(&zero).unwrap();
        let actual = noisy.overlap(&ideal).unwrap();
        assert!((actual - (PI / 16.0).cos()).abs() < 1e-12);
        assert!(actual >= bound);
        assert_eq!(fidelity_lower_bound(&h, 0.0), 1.0);
    }

    #[test]
    fn over_rotation_scales_angles() {
        let rx = gates::rotation(Pauli::X, 0.8).unwrap();
        let out = over_rotate(&rx, 0.25).unwrap();
        assert_eq!(out.label(), &GateLabel::Rx(1.0));
        let h = gates::hadamard();
        assert_eq!(over_rotate(&h, 0.25).unwrap(), h);
        let crz = GateLabel::Controlled(Box::new(GateLabel::Rz(0.4))).to_gate().unwrap();
        let out = over_rotate(&crz, 0.5).unwrap();
        assert_eq!(
            out.label(),
            &GateLabel::Controlled(Box::new(GateLabel::Rz(0.6000000000000001)))
        );
    }

    #[test]
    fn scaling_follows_error_probability() {
        let model = NoiseModel::default()
            .with_channel(NoiseSpec::new(ChannelKind::BitFlip, 0.9).unwrap())
            .with_channel(NoiseSpec::new(ChannelKind::Depolarizing, 0.3).unwrap())
            .with_cce(0.1);
        let scaled = model.scaled(2.0).unwrap();
        assert!((scaled.model.channels[0].p - 0.8).abs() < 1e-15);
        assert!((scaled.model.channels[1].p - 0.6).abs() < 1e-15);
        assert!((scaled.model.cce_epsilon - 0.2).abs() < 1e-15);
        assert!(scaled.warnings.is_empty());

        let saturated = model.scaled(4.0).unwrap();
        assert_eq!(saturated.model.channels[1].p, 1.0);
        assert_eq!(saturated.warnings.len(), 1);
        assert_eq!(model.scaled(1.0).unwrap().model, model);
    }

    #[test]
    fn noisy_run_depolarizing_is_affine_in_scale() {
        let mut circuit = Circuit::new(1).unwrap();
        circuit.noise = NoiseModel::default().with_channel(
            NoiseSpec::new(ChannelKind::Depolarizing, 0.1)
                .unwrap()
                .at(Placement::End),
        );
        let z = Observable::pauli_string("Z").unwrap();
        let rho0 = rho("0");
        for lambda in [1.0, 2.0, 3.5] {
            let model = circuit.noise.scaled(lambda).unwrap().model;
            let out = run_with_model(&circuit, &rho0, &model).unwrap();
            assert!((out.expectation(&z).unwrap() - (1.0 - 0.1 * lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_run_without_noise_matches_unitary() {
        let mut circuit = Circuit::new(2).unwrap();
        circuit.h(0).unwrap().cnot(0, 1).unwrap();
        let out = run_noisy(&circuit, &rho("00")).unwrap();
        let expected = pure(&circuit.run().unwrap());
        assert!(max_abs_diff(out.matrix(), expected.matrix()) < 1e-12);
    }

    #[test]
    fn per_gate_noise_only_touches_targets() {
        let mut circuit = Circuit::new(2).unwrap();
        circuit.x(0).unwrap();
        circuit.noise =
            NoiseModel::default().with_channel(NoiseSpec::new(ChannelKind::BitFlip, 0.9).unwrap());
        let out = run_noisy(&circuit, &rho("00")).unwrap();
        assert!(max_abs_diff(out.matrix(), &diag(&[0.1, 0.0, 0.9, 0.0])) < 1e-12);
    }

    fn arb_mixed() -> impl Strategy<Value = DensityMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4).prop_map(|v| {
            let a = Matrix::from_fn(2, 2, |r, col| c(v[2 * r + col].0, v[2 * r + col].1));
            let m = &a * a.adjoint();
            let t = linalg::trace(&m).re.max(1e-9);
            DensityMatrix::new(m.unscale(t)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn channels_are_complete_and_contract_purity(p in 0.0f64..=1.0, rho in arb_mixed()) {
            for ch in [bit_flip(p).unwrap(), phase_flip(p).unwrap(), depolarizing(p).unwrap()] {
                prop_assert!(ch.completeness_deviation() < 1e-10);
                let out = ch.apply(&rho, &[0]).unwrap();
                prop_assert!((linalg::trace(out.matrix()).re - 1.0).abs() < 1e-10);
                prop_assert!(linalg::hermiticity_deviation(out.matrix()) < 1e-10);
                prop_assert!(out.purity() <= rho.purity() + 1e-10);
            }
        }

        #[test]
        fn depolarizing_matches_affine_formula(p in 0.0f64..=1.0, rho in arb_mixed()) {
            let out = depolarizing(p).unwrap().apply(&rho, &[0]).unwrap();
            let affine = linalg::identity(2).scale(p / 2.0) + rho.matrix().scale(1.0 - p);
            prop_assert!(max_abs_diff(out.matrix(), &affine) < 1e-10);
        }

        #[test]
        fn perturbation_commutes(theta in -3.0f64..3.0, eps in -1.0f64..1.0, axis in 0usize..3) {
            let axis = [Pauli::X, Pauli::Y, Pauli::Z][axis];
            let h = HermitianGenerator::pauli(axis).scaled(theta);
            let lhs = perturbed_gate(&h, eps).unwrap();
            let rhs = gates::from_generator(&h, 1.0).unwrap()
                .compose(&gates::from_generator(&h, eps).unwrap()).unwrap();
            prop_assert!(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-10);
        }
    }
}
