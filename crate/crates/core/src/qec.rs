//! Three-qubit bit-flip and phase-flip codes and the nine-qubit Shor code.
//!
//! A code's syndrome measurement is a list of projective measurements
//! (groups) performed in order. The three-qubit codes have one group with
//! the four projectors `P0 … P3` (or `P0' … P3'` in the `±` basis). The
//! Shor code measures the bit-flip syndrome of each block of three qubits
//! first, then the relative sign between blocks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::gates::{self, Gate, Pauli};
use crate::linalg::{self, c, Matrix, C64};
use crate::measure::{self, Projector, PROBABILITY_FLOOR};
use crate::state::StateVector;
use crate::{Error, Result};

/// States whose overlap with the code space is below `1 - CODE_SPACE_TOLERANCE`
/// cannot be decoded.
pub const CODE_SPACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    BitFlip3,
    PhaseFlip3,
    Shor9,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::BitFlip3 => "bitflip3",
            CodeKind::PhaseFlip3 => "phaseflip3",
            CodeKind::Shor9 => "shor9",
        })
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bitflip3" | "bitflip" => Ok(CodeKind::BitFlip3),
            "phaseflip3" | "phaseflip" => Ok(CodeKind::PhaseFlip3),
            "shor9" | "shor" => Ok(CodeKind::Shor9),
            other => Err(Error::InvalidArgument(format!("unknown code `{other}`"))),
        }
    }
}

/// One projective syndrome measurement: labelled projectors, each paired
/// with the Pauli that undoes the error it flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeGroup {
    labels: Vec<String>,
    projectors: Vec<Projector>,
    corrections: Vec<Option<(Pauli, usize)>>,
}

impl SyndromeGroup {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    /// Corrective Pauli and the qubit it acts on, for each outcome.
    pub fn corrections(&self) -> &[Option<(Pauli, usize)>] {
        &self.corrections
    }

    fn probabilities(&self, amps: &[C64]) -> Vec<f64> {
        self.projectors.iter().map(|p| p.weight(amps).max(0.0)).collect()
    }
}

/// Measured syndrome: one outcome index per group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome {
    pub outcomes: Vec<usize>,
    pub labels: Vec<String>,
}

impl Syndrome {
    /// True when every group reported "no error".
    pub fn is_trivial(&self) -> bool {
        self.outcomes.iter().all(|&i| i == 0)
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeInstance {
    kind: CodeKind,
    n_physical: usize,
    groups: Vec<SyndromeGroup>,
}

impl CodeInstance {
    pub fn new(kind: CodeKind) -> Self {
        match kind {
            CodeKind::BitFlip3 => Self {
                kind,
                n_physical: 3,
                groups: vec![bit_flip_group(3, 0, "P")],
            },
            CodeKind::PhaseFlip3 => Self {
                kind,
                n_physical: 3,
                groups: vec![phase_flip_group()],
            },
            CodeKind::Shor9 => {
                let mut groups: Vec<SyndromeGroup> = (0..3)
                    .map(|b| bit_flip_group(9, 3 * b, &format!("block{}:P", b + 1)))
                    .collect();
                groups.push(shor_outer_group());
                Self {
                    kind,
                    n_physical: 9,
                    groups,
                }
            }
        }
    }

    pub fn bit_flip() -> Self {
        Self::new(CodeKind::BitFlip3)
    }

    pub fn phase_flip() -> Self {
        Self::new(CodeKind::PhaseFlip3)
    }

    pub fn shor() -> Self {
        Self::new(CodeKind::Shor9)
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    pub fn groups(&self) -> &[SyndromeGroup] {
        &self.groups
    }

    /// Encoding circuit acting on `ψ ⊗ |0…0⟩`.
    ///
    /// The bit-flip code uses `(CNOT⊗I)(I⊗SWAP)(CNOT⊗I)`; the phase-flip
    /// code follows it with a Hadamard on each qubit. The Shor code runs the
    /// phase-flip encoder on qubits 0, 3, 6 and then the bit-flip encoder
    /// inside each block.
    pub fn encoding_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.n_physical)?;
        let repetition = |c: &mut Circuit, a: usize, b: usize, d: usize| -> Result<()> {
            c.cnot(a, b)?.swap(b, d)?.cnot(a, b)?;
            Ok(())
        };
        match self.kind {
            CodeKind::BitFlip3 => repetition(&mut c, 0, 1, 2)?,
            CodeKind::PhaseFlip3 => {
                repetition(&mut c, 0, 1, 2)?;
                for q in 0..3 {
                    c.h(q)?;
                }
            }
            CodeKind::Shor9 => {
                repetition(&mut c, 0, 3, 6)?;
                for q in [0, 3, 6] {
                    c.h(q)?;
                }
                for b in [0, 3, 6] {
                    repetition(&mut c, b, b + 1, b + 2)?;
                }
            }
        }
        Ok(c)
    }

    /// Encodes `α|0⟩ + β|1⟩`.
    pub fn encode(&self, alpha: C64, beta: C64) -> Result<StateVector> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { norm: norm.sqrt() });
        }
        self.encode_state(&StateVector::qubit(alpha, beta)?)
    }

    pub fn encode_state(&self, logical: &StateVector) -> Result<StateVector> {
        if logical.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: logical.n_qubits(),
            });
        }
        let input = logical.tensor(&StateVector::zero(self.n_physical - 1)?)?;
        self.encoding_circuit()?.run_statevector(&input)
    }

    /// Probabilities of every syndrome with non-negligible weight, in
    /// measurement order.
    pub fn syndrome_distribution(&self, psi: &StateVector) -> Result<Vec<(Syndrome, f64)>> {
        self.check(psi)?;
        let mut out = Vec::new();
        self.branch(psi.amplitudes().to_vec(), 0, Vec::new(), &mut out);
        Ok(out)
    }

    fn branch(&self, amps: Vec<C64>, depth: usize, path: Vec<usize>, out: &mut Vec<(Syndrome, f64)>) {
        if depth == self.groups.len() {
            let weight = amps.iter().map(|a| a.norm_sqr()).sum();
            out.push((self.syndrome(path), weight));
            return;
        }
        for (i, p) in self.groups[depth].projectors.iter().enumerate() {
            let projected = p.project(&amps);
            let weight: f64 = projected.iter().map(|a| a.norm_sqr()).sum();
            if weight > PROBABILITY_FLOOR {
                let mut next = path.clone();
                next.push(i);
                self.branch(projected, depth + 1, next, out);
            }
        }
    }

    fn syndrome(&self, outcomes: Vec<usize>) -> Syndrome {
        let labels = outcomes
            .iter()
            .zip(&self.groups)
            .map(|(&i, g)| g.labels[i].clone())
            .collect();
        Syndrome { outcomes, labels }
    }

    /// Looks up a syndrome by its labels, one per group.
    pub fn syndrome_from_labels(&self, labels: &[&str]) -> Result<Syndrome> {
        if labels.len() != self.groups.len() {
            return Err(Error::InvalidArgument(format!(
                "{} code expects {} syndrome labels, got {}",
                self.kind,
                self.groups.len(),
                labels.len()
            )));
        }
        let outcomes = labels
            .iter()
            .zip(&self.groups)
            .map(|(l, g)| {
                g.labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown syndrome label `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.syndrome(outcomes))
    }

    /// Measures every syndrome group in turn, collapsing the state.
    pub fn measure_syndrome<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        rng: &mut R,
    ) -> Result<(Syndrome, StateVector)> {
        self.check(psi)?;
        let mut amps = psi.amplitudes().to_vec();
        let mut outcomes = Vec::with_capacity(self.groups.len());
        for group in &self.groups {
            let probs = group.probabilities(&amps);
            let i = measure::sample_index(&probs, rng);
            amps = group.projectors[i].project(&amps);
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            amps.iter_mut().for_each(|a| *a /= norm);
            outcomes.push(i);
        }
        Ok((self.syndrome(outcomes), StateVector::normalized(amps)?))
    }

    /// Applies the Pauli corrections selected by `syndrome`.
    pub fn correct(&self, syndrome: &Syndrome, psi: &StateVector) -> Result<StateVector> {
        self.check(psi)?;
        if syndrome.outcomes.len() != self.groups.len() {
            return Err(Error::InvalidArgument(format!(
                "syndrome has {} outcomes, code has {} groups",
                syndrome.outcomes.len(),
                self.groups.len()
            )));
        }
        let mut out = psi.clone();
        for (&i, group) in syndrome.outcomes.iter().zip(&self.groups) {
            let fix = group.corrections.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                bound: group.corrections.len(),
            })?;
            if let Some((pauli, q)) = fix {
                out = gates::pauli(*pauli).apply_on(&out, &[*q])?;
            }
        }
        Ok(out)
    }

    /// Measures the syndrome and corrects.
    pub fn detect_and_correct<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        rng: &mut R,
    ) -> Result<(Syndrome, StateVector)> {
        let (syndrome, collapsed) = self.measure_syndrome(psi, rng)?;
        let corrected = self.correct(&syndrome, &collapsed)?;
        Ok((syndrome, corrected))
    }

    /// Runs the inverse encoder and returns the logical qubit.
    pub fn decode(&self, psi: &StateVector) -> Result<StateVector> {
        self.check(psi)?;
        let raw = self.encoding_circuit()?.inverse().run_statevector(psi)?;
        let amps = raw.amplitudes();
        let one = 1usize << (self.n_physical - 1);
        let weight = 1.0 - amps[0].norm_sqr() - amps[one].norm_sqr();
        if weight > CODE_SPACE_TOLERANCE {
            return Err(Error::OutsideCodeSpace { weight });
        }
        StateVector::normalized(vec![amps[0], amps[one]])
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        if psi.n_qubits() != self.n_physical {
            return Err(Error::DimensionMismatch {
                expected: self.n_physical,
                found: psi.n_qubits(),
            });
        }
        Ok(())
    }
}

fn bit(x: usize, q: usize, n: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// `P0 … P3` on qubits `first .. first + 3` of an `n`-qubit register:
/// outcome `i > 0` means qubit `first + i - 1` disagrees with the other two.
fn bit_flip_group(n: usize, first: usize, prefix: &str) -> SyndromeGroup {
    let flagged = |x: usize| {
        let b = [bit(x, first, n), bit(x, first + 1, n), bit(x, first + 2, n)];
        match (b[0] ^ b[1], b[1] ^ b[2]) {
            (0, 0) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            _ => 3,
        }
    };
    let dim = 1usize << n;
    let projectors = (0..4)
        .map(|i| Projector::Diagonal((0..dim).map(|x| flagged(x) == i).collect()))
        .collect();
    SyndromeGroup {
        labels: (0..4).map(|i| format!("{prefix}{i}")).collect(),
        projectors,
        corrections: std::iter::once(None)
            .chain((0..3).map(|k| Some((Pauli::X, first + k))))
            .collect(),
    }
}

/// `P0' … P3'`: the bit-flip projectors conjugated by `H⊗H⊗H`.
fn phase_flip_group() -> SyndromeGroup {
    let h3 = gates::hadamard().kron(&gates::hadamard()).kron(&gates::hadamard());
    let base = bit_flip_group(3, 0, "P");
    let projectors = base
        .projectors
        .iter()
        .map(|p| Projector::Dense(h3.matrix() * p.to_matrix() * h3.matrix()))
        .collect();
    SyndromeGroup {
        labels: (0..4).map(|i| format!("P{i}'")).collect(),
        projectors,
        corrections: std::iter::once(None)
            .chain((0..3).map(|k| Some((Pauli::Z, k))))
            .collect(),
    }
}

/// Relative-sign measurement between blocks: projectors onto the joint
/// eigenspaces of `X1X2` and `X2X3`, where `Xb` is `X⊗X⊗X` on block `b`.
fn shor_outer_group() -> SyndromeGroup {
    let block = |b: usize| 0b111usize << (6 - 3 * b);
    let flip = |mask: usize| Matrix::from_fn(512, 512, |r, col| {
        if r == col ^ mask {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let x12 = flip(block(0) | block(1));
    let x23 = flip(block(1) | block(2));
    let x13 = flip(block(0) | block(2));
    let id = linalg::identity(512);
    let projector = |a: f64, b: f64| (&id + x12.scale(a) + x23.scale(b) + x13.scale(a * b)).scale(0.25);
    let signs = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    SyndromeGroup {
        labels: ["none", "block1", "block2", "block3"]
            .iter()
            .map(|l| format!("outer:{l}"))
            .collect(),
        projectors: signs
            .iter()
            .map(|&(a, b)| Projector::Dense(projector(a, b)))
            .collect(),
        corrections: std::iter::once(None)
            .chain((0..3).map(|b| Some((Pauli::Z, 3 * b))))
            .collect(),
    }
}

/// Error injected on an encoded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum ErrorModel {
    None,
    X,
    Y,
    Z,
    /// `R_x(π/2)`, half a bit flip.
    RxHalf,
    /// Random single-qubit unitary.
    RandomUnitary,
    /// Bit-flip channel on every qubit, sampled per trial; `p` is the
    /// probability that a qubit is left untouched.
    BitFlipChannel { p: f64 },
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorModel::None => f.write_str("none"),
            ErrorModel::X => f.write_str("x"),
            ErrorModel::Y => f.write_str("y"),
            ErrorModel::Z => f.write_str("z"),
            ErrorModel::RxHalf => f.write_str("rx-half"),
            ErrorModel::RandomUnitary => f.write_str("random-unitary"),
            ErrorModel::BitFlipChannel { p } => write!(f, "bitflip-channel:{p}"),
        }
    }
}

impl FromStr for ErrorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(p) = lower.strip_prefix("bitflip-channel:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad probability in `{s}`")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
            }
            return Ok(ErrorModel::BitFlipChannel { p });
        }
        Ok(match lower.as_str() {
            "none" => ErrorModel::None,
            "x" | "bit-flip" => ErrorModel::X,
            "y" => ErrorModel::Y,
            "z" | "phase-flip" => ErrorModel::Z,
            "rx-half" => ErrorModel::RxHalf,
            "random-unitary" => ErrorModel::RandomUnitary,
            other => return Err(Error::InvalidArgument(format!("unknown error model `{other}`"))),
        })
    }
}

/// Haar-random single-qubit unitary (ZYZ Euler angles).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Gate {
    use std::f64::consts::TAU;
    let a = rng.random::<f64>() * TAU;
    let b = (1.0 - 2.0 * rng.random::<f64>()).acos();
    let g = rng.random::<f64>() * TAU;
    let rz = |t| gates::rotation(Pauli::Z, t).expect("finite angle");
    let ry = gates::rotation(Pauli::Y, b).expect("finite angle");
    rz(a).compose(&ry).and_then(|m| m.compose(&rz(g))).expect("single-qubit gates")
}

/// Applies the error model, returning the corrupted state and the qubits hit.
pub fn inject_error<R: Rng + ?Sized>(
    psi: &StateVector,
    model: ErrorModel,
    rng: &mut R,
) -> Result<(StateVector, Vec<usize>)> {
    let n = psi.n_qubits();
    let single = |gate: Gate, rng: &mut R| -> Result<(StateVector, Vec<usize>)> {
        let q = rng.random_range(0..n);
        Ok((gate.apply_on(psi, &[q])?, vec![q]))
    };
    match model {
        ErrorModel::None => Ok((psi.clone(), Vec::new())),
        ErrorModel::X => single(gates::pauli(Pauli::X), rng),
        ErrorModel::Y => single(gates::pauli(Pauli::Y), rng),
        ErrorModel::Z => single(gates::pauli(Pauli::Z), rng),
        ErrorModel::RxHalf => single(gates::rotation(Pauli::X, std::f64::consts::FRAC_PI_2)?, rng),
        ErrorModel::RandomUnitary => {
            let u = random_unitary(rng);
            single(u, rng)
        }
        ErrorModel::BitFlipChannel { p } => {
            let x = gates::pauli(Pauli::X);
            let mut out = psi.clone();
            let mut hit = Vec::new();
            for q in 0..n {
                if rng.random::<f64>() >= p {
                    out = x.apply_on(&out, &[q])?;
                    hit.push(q);
                }
            }
            Ok((out, hit))
        }
    }
}

/// Outcome of repeated encode, corrupt, correct, decode cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub code: CodeKind,
    pub error_model: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_fidelity: f64,
    pub min_fidelity: f64,
}

/// A trial succeeds when the corrected state has fidelity `|⟨ψ_enc|ψ⟩| ≥ 1 - 1e-9`
/// with the uncorrupted encoding of a random logical state.
pub fn run_trials<R: Rng + ?Sized>(
    code: &CodeInstance,
    model: ErrorModel,
    trials: usize,
    rng: &mut R,
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut successes = 0;
    let mut total = 0.0;
    let mut min = f64::INFINITY;
    for _ in 0..trials {
        let logical = random_qubit(rng);
        let encoded = code.encode_state(&logical)?;
        let (corrupted, _) = inject_error(&encoded, model, rng)?;
        let (_, corrected) = code.detect_and_correct(&corrupted, rng)?;
        let fidelity = corrected.overlap(&encoded)?;
        if fidelity >= 1.0 - 1e-9 {
            successes += 1;
        }
        total += fidelity;
        min = min.min(fidelity);
    }
    Ok(TrialSummary {
        code: code.kind(),
        error_model: model.to_string(),
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_fidelity: total / trials as f64,
        min_fidelity: min,
    })
}

/// Random point on the Bloch sphere, uniform in area.
pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    StateVector::from_bloch(crate::state::BlochCoordinates { theta, phi })
}
