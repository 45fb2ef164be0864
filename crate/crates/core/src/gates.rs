//! Unitary gates, Hermitian generators and their application to states.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, Matrix, C64, I, ONE, ZERO};
use crate::state::StateVector;
use crate::{Error, Result};

pub const UNITARY_TOLERANCE: f64 = 1e-10;
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Matrix {
        match self {
            Pauli::X => linalg::matrix(2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => linalg::matrix(2, &[ZERO, -I, I, ZERO]),
            Pauli::Z => linalg::matrix(2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    pub fn from_char(ch: char) -> Option<Self> {
        match ch.to_ascii_uppercase() {
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Serializable gate name. Round-trips through `Display`/`FromStr` for every
/// variant except `Custom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GateLabel {
    I,
    X,
    Y,
    Z,
    H,
    S,
    T,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    /// `diag(1, e^{2πi/2^k})`; `R(2) = S`, `R(3) = T`.
    R(u32),
    Cnot,
    Swap,
    Controlled(Box<GateLabel>),
    Custom(String),
}

impl GateLabel {
    pub fn arity(&self) -> Option<usize> {
        match self {
            GateLabel::Cnot | GateLabel::Swap => Some(2),
            GateLabel::Controlled(inner) => inner.arity().map(|a| a + 1),
            GateLabel::Custom(_) => None,
            _ => Some(1),
        }
    }

    /// True for gates carrying a continuous rotation angle.
    pub fn is_parameterized(&self) -> bool {
        matches!(self, GateLabel::Rx(_) | GateLabel::Ry(_) | GateLabel::Rz(_))
    }

    /// Builds the gate named by this label.
    pub fn to_gate(&self) -> Result<Gate> {
        Ok(match self {
            GateLabel::I => Gate::identity(1),
            GateLabel::X => pauli(Pauli::X),
            GateLabel::Y => pauli(Pauli::Y),
            GateLabel::Z => pauli(Pauli::Z),
            GateLabel::H => hadamard(),
            GateLabel::S => phase_s(),
            GateLabel::T => phase_t(),
            GateLabel::Rx(t) => rotation(Pauli::X, *t)?,
            GateLabel::Ry(t) => rotation(Pauli::Y, *t)?,
            GateLabel::Rz(t) => rotation(Pauli::Z, *t)?,
            GateLabel::R(k) => phase_r(*k)?,
            GateLabel::Cnot => cnot(),
            GateLabel::Swap => swap(),
            GateLabel::Controlled(inner) => controlled(&inner.to_gate()?)?,
            GateLabel::Custom(name) => return Err(Error::UnknownGate(name.clone())),
        })
    }
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateLabel::I => write!(f, "I"),
            GateLabel::X => write!(f, "X"),
            GateLabel::Y => write!(f, "Y"),
            GateLabel::Z => write!(f, "Z"),
            GateLabel::H => write!(f, "H"),
            GateLabel::S => write!(f, "S"),
            GateLabel::T => write!(f, "T"),
            GateLabel::Rx(t) => write!(f, "RX({t})"),
            GateLabel::Ry(t) => write!(f, "RY({t})"),
            GateLabel::Rz(t) => write!(f, "RZ({t})"),
            GateLabel::R(k) => write!(f, "R({k})"),
            GateLabel::Cnot => write!(f, "CNOT"),
            GateLabel::Swap => write!(f, "SWAP"),
            GateLabel::Controlled(inner) => write!(f, "CU({inner})"),
            GateLabel::Custom(name) => write!(f, "{name}"),
        }
    }
}

impl FromStr for GateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::UnknownGate(s.to_string()));
                }
                (&s[..open], Some(&s[open + 1..s.len() - 1]))
            }
            None => (s, None),
        };
        let head = head.trim().to_ascii_uppercase();
        let angle = |arg: Option<&str>| -> Result<f64> {
            let arg = arg.ok_or_else(|| Error::UnknownGate(s.to_string()))?;
            parse_angle(arg)
                .ok_or_else(|| Error::InvalidArgument(format!("cannot parse angle `{arg}`")))
        };
        let label = match (head.as_str(), arg) {
            ("I", None) => GateLabel::I,
            ("X", None) => GateLabel::X,
            ("Y", None) => GateLabel::Y,
            ("Z", None) => GateLabel::Z,
            ("H", None) => GateLabel::H,
            ("S", None) => GateLabel::S,
            ("T", None) => GateLabel::T,
            ("CNOT" | "CX", None) => GateLabel::Cnot,
            ("SWAP", None) => GateLabel::Swap,
            ("RX", _) => GateLabel::Rx(angle(arg)?),
            ("RY", _) => GateLabel::Ry(angle(arg)?),
            ("RZ", _) => GateLabel::Rz(angle(arg)?),
            ("R", Some(k)) => GateLabel::R(
                k.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad R order `{k}`")))?,
            ),
            ("CU", Some(inner)) => GateLabel::Controlled(Box::new(inner.parse()?)),
            _ => return Err(Error::UnknownGate(s.to_string())),
        };
        Ok(label)
    }
}

/// Parses angle literals such as `1.5`, `pi`, `-pi/4` or `3*pi/8`.
pub fn parse_angle(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, text.strip_prefix('+').unwrap_or(text)),
    };
    let atom = |a: &str| -> Option<f64> {
        let a = a.trim();
        if a.eq_ignore_ascii_case("pi") || a == "π" {
            Some(PI)
        } else {
            a.parse::<f64>().ok()
        }
    };
    let mut value = None;
    let mut pending = '*';
    let mut start = 0;
    for (i, ch) in body.char_indices().chain(std::iter::once((body.len(), '*'))) {
        if ch == '*' || ch == '/' {
            let x = atom(&body[start..i])?;
            value = Some(match (value, pending) {
                (None, _) => x,
                (Some(v), '*') => v * x,
                (Some(v), _) => v / x,
            });
            pending = ch;
            start = i + ch.len_utf8();
        }
    }
    value.map(|v| sign * v).filter(|v| v.is_finite())
}

/// A unitary acting on `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    label: GateLabel,
    matrix: Matrix,
}

impl Gate {
    /// Checks unitarity within [`UNITARY_TOLERANCE`].
    pub fn new(label: GateLabel, matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || linalg::qubits_for_dim(matrix.nrows()).is_none() {
            return Err(Error::InvalidArgument(format!(
                "gate matrix must be 2^k × 2^k, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = linalg::unitarity_deviation(&matrix);
        if !(deviation < UNITARY_TOLERANCE) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { label, matrix })
    }

    pub fn custom(name: impl Into<String>, matrix: Matrix) -> Result<Self> {
        Self::new(GateLabel::Custom(name.into()), matrix)
    }

    pub(crate) fn trusted(label: GateLabel, matrix: Matrix) -> Self {
        debug_assert!(linalg::unitarity_deviation(&matrix) < 1e-9);
        Self { label, matrix }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let label = if n_qubits == 1 {
            GateLabel::I
        } else {
            GateLabel::Custom(format!("I{n_qubits}"))
        };
        Self::trusted(label, linalg::identity(1 << n_qubits))
    }

    pub fn label(&self) -> &GateLabel {
        &self.label
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn arity(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }

    pub fn dagger(&self) -> Gate {
        let label = match &self.label {
            GateLabel::Rx(t) => GateLabel::Rx(-t),
            GateLabel::Ry(t) => GateLabel::Ry(-t),
            GateLabel::Rz(t) => GateLabel::Rz(-t),
            l @ (GateLabel::I
            | GateLabel::X
            | GateLabel::Y
            | GateLabel::Z
            | GateLabel::H
            | GateLabel::Cnot
            | GateLabel::Swap) => l.clone(),
            other => GateLabel::Custom(format!("{other}†")),
        };
        Gate::trusted(label, self.matrix.adjoint())
    }

    /// Matrix product `self · other`: `other` acts first.
    pub fn compose(&self, other: &Gate) -> Result<Gate> {
        self.check_arity(other.arity())?;
        Ok(Gate::trusted(
            GateLabel::Custom(format!("{}·{}", self.label, other.label)),
            &self.matrix * &other.matrix,
        ))
    }

    /// Parallel composition `self ⊗ other`.
    pub fn kron(&self, other: &Gate) -> Gate {
        Gate::trusted(
            GateLabel::Custom(format!("{}⊗{}", self.label, other.label)),
            linalg::kron(&self.matrix, &other.matrix),
        )
    }

    /// Lifts the gate to an `n`-qubit register, acting on `targets` in the
    /// given order and as the identity elsewhere.
    pub fn embed(&self, targets: &[usize], n_qubits: usize) -> Result<Gate> {
        self.check_targets(targets, n_qubits)?;
        if n_qubits > crate::circuit::MAX_DENSE_QUBITS {
            return Err(Error::RegisterTooLarge {
                n: n_qubits,
                max: crate::circuit::MAX_DENSE_QUBITS,
            });
        }
        let is_whole = targets.len() == n_qubits && targets.iter().enumerate().all(|(i, &q)| i == q);
        if is_whole {
            return Ok(self.clone());
        }
        Ok(Gate::trusted(
            GateLabel::Custom(format!("{}@{:?}", self.label, targets)),
            linalg::embed_dense(&self.matrix, targets, n_qubits),
        ))
    }

    /// `U·ψ` for a gate spanning the whole register.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_arity(psi.n_qubits())?;
        let v = &self.matrix * nalgebra::DVector::from_column_slice(psi.amplitudes());
        Ok(StateVector::from_unitary_image(
            psi.n_qubits(),
            v.iter().copied().collect(),
        ))
    }

    /// Applies the gate to `targets` of a larger register by index arithmetic.
    pub fn apply_on(&self, psi: &StateVector, targets: &[usize]) -> Result<StateVector> {
        self.check_targets(targets, psi.n_qubits())?;
        let mut amps = psi.amplitudes().to_vec();
        linalg::apply_local(&mut amps, psi.n_qubits(), targets, &self.matrix);
        Ok(StateVector::from_unitary_image(psi.n_qubits(), amps))
    }

    pub(crate) fn check_targets(&self, targets: &[usize], n_qubits: usize) -> Result<()> {
        if targets.len() != self.arity() {
            return Err(Error::InvalidTargets(format!(
                "gate {} acts on {} qubit(s) but {} target(s) given",
                self.label,
                self.arity(),
                targets.len()
            )));
        }
        linalg::validate_targets(targets, n_qubits)
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if self.arity() != n {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                found: n,
            });
        }
        Ok(())
    }
}

pub fn pauli(which: Pauli) -> Gate {
    let label = match which {
        Pauli::X => GateLabel::X,
        Pauli::Y => GateLabel::Y,
        Pauli::Z => GateLabel::Z,
    };
    Gate::trusted(label, which.matrix())
}

/// `R_P(θ) = e^{-i(θ/2)P}`.
pub fn rotation(axis: Pauli, theta: f64) -> Result<Gate> {
    if !theta.is_finite() {
        return Err(Error::NonFinite(format!("rotation angle {theta}")));
    }
    let (s, co) = (theta / 2.0).sin_cos();
    let m = linalg::identity(2).scale(co) - axis.matrix() * c(0.0, s);
    let label = match axis {
        Pauli::X => GateLabel::Rx(theta),
        Pauli::Y => GateLabel::Ry(theta),
        Pauli::Z => GateLabel::Rz(theta),
    };
    Ok(Gate::trusted(label, m))
}

pub fn hadamard() -> Gate {
    Gate::trusted(
        GateLabel::H,
        linalg::real_matrix(2, &[1.0, 1.0, 1.0, -1.0]).scale(FRAC_1_SQRT_2),
    )
}

pub fn phase_s() -> Gate {
    Gate::trusted(GateLabel::S, linalg::matrix(2, &[ONE, ZERO, ZERO, I]))
}

pub fn phase_t() -> Gate {
    Gate::trusted(
        GateLabel::T,
        linalg::matrix(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, PI / 4.0)]),
    )
}

/// `diag(1, e^{2πi/2^k})`, the rotation used by the Fourier transform.
pub fn phase_r(k: u32) -> Result<Gate> {
    if k == 0 || k > 62 {
        return Err(Error::InvalidArgument(format!("R(k) needs 1 ≤ k ≤ 62, got {k}")));
    }
    let angle = 2.0 * PI / (1u64 << k) as f64;
    Ok(Gate::trusted(
        GateLabel::R(k),
        linalg::matrix(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, angle)]),
    ))
}

/// CNOT with qubit 0 as control.
pub fn cnot() -> Gate {
    Gate::trusted(
        GateLabel::Cnot,
        linalg::real_matrix(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        ),
    )
}

pub fn swap() -> Gate {
    Gate::trusted(
        GateLabel::Swap,
        linalg::real_matrix(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        ),
    )
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U`, control on the first qubit.
pub fn controlled(u: &Gate) -> Result<Gate> {
    if u.arity() != 1 {
        return Err(Error::InvalidArgument(format!(
            "controlled() takes a single-qubit gate, got arity {}",
            u.arity()
        )));
    }
    let mut m = linalg::identity(4);
    m.view_mut((2, 2), (2, 2)).copy_from(u.matrix());
    Ok(Gate::trusted(GateLabel::Controlled(Box::new(u.label.clone())), m))
}

/// Hermitian `H` with cached eigendecomposition, so that `e^{-itH}` is exact
/// up to eigensolver accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianGenerator {
    matrix: Matrix,
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl HermitianGenerator {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || linalg::qubits_for_dim(matrix.nrows()).is_none() {
            return Err(Error::InvalidArgument(
                "generator must be 2^k × 2^k".to_string(),
            ));
        }
        let deviation = linalg::hermiticity_deviation(&matrix);
        if !(deviation < HERMITIAN_TOLERANCE) {
            return Err(Error::NotHermitian { deviation });
        }
        let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(&matrix);
        Ok(Self {
            matrix,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn pauli(which: Pauli) -> Self {
        Self::new(which.matrix()).expect("Pauli matrices are Hermitian")
    }

    /// `scale · H`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut values = self.eigenvalues.clone();
        values.iter_mut().for_each(|v| *v *= scale);
        if scale < 0.0 {
            // keep ascending order
            values.reverse();
            let dim = self.eigenvectors.ncols();
            let mut vectors = Matrix::zeros(dim, dim);
            for k in 0..dim {
                vectors.set_column(k, &self.eigenvectors.column(dim - 1 - k));
            }
            return Self {
                matrix: self.matrix.scale(scale),
                eigenvalues: values,
                eigenvectors: vectors,
            };
        }
        Self {
            matrix: self.matrix.scale(scale),
            eigenvalues: values,
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn arity(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Distinct eigenvalues, merged within `tol`.
    pub fn distinct_eigenvalues(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &v in &self.eigenvalues {
            if out.last().map_or(true, |&last| (v - last).abs() > tol) {
                out.push(v);
            }
        }
        out
    }

    /// `e^{-itH}` as a dense matrix.
    pub fn exp_matrix(&self, t: f64) -> Matrix {
        linalg::spectral_map(&self.eigenvalues, &self.eigenvectors, |lambda| {
            C64::from_polar(1.0, -t * lambda)
        })
    }

    /// `e^{-itH}`.
    pub fn exp(&self, t: f64) -> Result<Gate> {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("evolution time {t}")));
        }
        Ok(Gate::trusted(
            GateLabel::Custom(format!("exp(-i·{t}·H)")),
            self.exp_matrix(t),
        ))
    }
}

/// `e^{-itH}`; the gate generated by `h` for time `t`.
pub fn from_generator(h: &HermitianGenerator, t: f64) -> Result<Gate> {
    h.exp(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::state::BellState;
    use proptest::prelude::*;

    fn ket(bits: &str) -> StateVector {
        StateVector::from_bits(bits).unwrap()
    }

    fn assert_state(a: &StateVector, b: &StateVector, tol: f64) {
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < tol, "{a} != {b}");
        }
    }

    #[test]
    fn pauli_examples() {
        assert_eq!(pauli(Pauli::X).apply(&ket("0")).unwrap(), ket("1"));
        let z1 = pauli(Pauli::Z).apply(&ket("1")).unwrap();
        assert_state(&z1, &ket("1").with_global_phase(PI), 1e-15);
        let y = pauli(Pauli::Y);
        assert!(max_abs_diff(&(y.matrix() * y.matrix()), &linalg::identity(2)) < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        let rx = rotation(Pauli::X, PI).unwrap();
        let minus_i_x = Pauli::X.matrix() * c(0.0, -1.0);
        assert!(max_abs_diff(rx.matrix(), &minus_i_x) < 1e-15);
        let rz = rotation(Pauli::Z, 0.0).unwrap();
        assert!(max_abs_diff(rz.matrix(), &linalg::identity(2)) < 1e-15);
        // cos(π/4)|0⟩ + sin(π/4)|1⟩
        let out = rotation(Pauli::Y, PI / 2.0).unwrap().apply(&ket("0")).unwrap();
        assert_state(&out, &StateVector::plus(), 1e-15);
        assert!(rotation(Pauli::X, f64::NAN).is_err());
        assert!(rotation(Pauli::X, f64::INFINITY).is_err());
    }

    #[test]
    fn single_qubit_constants() {
        assert_state(&hadamard().apply(&ket("0")).unwrap(), &StateVector::plus(), 1e-15);
        assert_state(&hadamard().apply(&ket("1")).unwrap(), &StateVector::minus(), 1e-15);
        let s1 = phase_s().apply(&ket("1")).unwrap();
        assert_state(&s1, &ket("1").with_global_phase(PI / 2.0), 1e-15);
        assert!(max_abs_diff(phase_r(2).unwrap().matrix(), phase_s().matrix()) < 1e-15);
        assert!(max_abs_diff(phase_r(3).unwrap().matrix(), phase_t().matrix()) < 1e-15);
    }

    #[test]
    fn two_qubit_gates() {
        let psi = StateVector::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let out = cnot().apply(&ket("1").tensor(&psi).unwrap()).unwrap();
        let x_psi = pauli(Pauli::X).apply(&psi).unwrap();
        assert_state(&out, &ket("1").tensor(&x_psi).unwrap(), 1e-15);

        let bell = cnot().apply(&StateVector::plus().tensor(&ket("0")).unwrap()).unwrap();
        assert_state(&bell, &StateVector::bell(BellState::PhiPlus), 1e-15);

        let other = StateVector::plus();
        let swapped = swap().apply(&psi.tensor(&other).unwrap()).unwrap();
        assert_state(&swapped, &other.tensor(&psi).unwrap(), 1e-15);

        let cx = controlled(&pauli(Pauli::X)).unwrap();
        assert!(max_abs_diff(cx.matrix(), cnot().matrix()) < 1e-15);
        assert!(controlled(&cnot()).is_err());
    }

    #[test]
    fn generator_examples() {
        let x = HermitianGenerator::pauli(Pauli::X);
        let g = from_generator(&x, PI / 2.0).unwrap();
        assert!(max_abs_diff(g.matrix(), rotation(Pauli::X, PI).unwrap().matrix()) < 1e-12);

        let z = HermitianGenerator::pauli(Pauli::Z);
        assert!(max_abs_diff(from_generator(&z, 0.0).unwrap().matrix(), &linalg::identity(2)) < 1e-15);

        // (π/2)(H − I) has eigenvalues 0 and −π, so its exponential is H itself.
        let h_gen = HermitianGenerator::new(
            (hadamard().matrix() - linalg::identity(2)).scale(PI / 2.0),
        )
        .unwrap();
        let g = from_generator(&h_gen, 1.0).unwrap();
        assert!(max_abs_diff(g.matrix(), hadamard().matrix()) < 1e-9);

        let not_hermitian = linalg::matrix(2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(
            HermitianGenerator::new(not_hermitian),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn negative_scaling_keeps_eigen_order() {
        let y = HermitianGenerator::pauli(Pauli::Y).scaled(-0.5);
        assert_eq!(y.eigenvalues(), &[-0.5, 0.5]);
        let direct = HermitianGenerator::new(Pauli::Y.matrix().scale(-0.5)).unwrap();
        assert!(max_abs_diff(&y.exp_matrix(0.7), &direct.exp_matrix(0.7)) < 1e-12);
    }

    #[test]
    fn embed_examples() {
        let x = pauli(Pauli::X);
        let e = x.embed(&[1], 2).unwrap();
        assert!(max_abs_diff(e.matrix(), &linalg::kron(&linalg::identity(2), x.matrix())) < 1e-15);
        assert!(max_abs_diff(cnot().embed(&[0, 1], 2).unwrap().matrix(), cnot().matrix()) < 1e-15);

        // control on qubit 1: |01⟩ ↔ |11⟩, |00⟩ and |10⟩ fixed
        let rev = cnot().embed(&[1, 0], 2).unwrap();
        for (input, output) in [("00", "00"), ("01", "11"), ("10", "10"), ("11", "01")] {
            assert_eq!(rev.apply(&ket(input)).unwrap(), ket(output));
        }
        assert!(cnot().embed(&[0, 0], 2).is_err());
        assert!(cnot().embed(&[0, 2], 2).is_err());
        assert!(x.embed(&[0, 1], 2).is_err());
    }

    #[test]
    fn apply_examples() {
        assert_eq!(pauli(Pauli::X).apply(&ket("0")).unwrap(), ket("1"));
        let psi = StateVector::bell(BellState::PsiMinus);
        assert_eq!(Gate::identity(2).apply(&psi).unwrap(), psi);
        let hh = hadamard().kron(&hadamard());
        let out = hh.apply(&ket("00")).unwrap();
        assert_state(&out, &StateVector::uniform(2).unwrap(), 1e-15);
        assert!(hadamard().apply(&ket("00")).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for text in ["X", "H", "RX(0.25)", "RY(-1.5)", "RZ(3)", "CNOT", "SWAP", "CU(S)", "CU(RX(0.5))", "R(4)"] {
            let label: GateLabel = text.parse().unwrap();
            assert_eq!(label.to_string().parse::<GateLabel>().unwrap(), label);
        }
        assert_eq!("rx(pi/2)".parse::<GateLabel>().unwrap(), GateLabel::Rx(PI / 2.0));
        assert_eq!("RZ(-3*pi/4)".parse::<GateLabel>().unwrap(), GateLabel::Rz(-3.0 * PI / 4.0));
        assert!("FOO".parse::<GateLabel>().is_err());
        assert!("RX".parse::<GateLabel>().is_err());
        assert!("RX(abc)".parse::<GateLabel>().is_err());
    }

    fn random_unitary(n: usize, seed: &[f64]) -> Gate {
        // exp of a random Hermitian matrix
        let dim = 1 << n;
        let mut m = Matrix::zeros(dim, dim);
        let mut it = seed.iter().cycle();
        for r in 0..dim {
            for col in r..dim {
                let re = *it.next().unwrap();
                let im = if r == col { 0.0 } else { *it.next().unwrap() };
                m[(r, col)] = c(re, im);
                m[(col, r)] = c(re, -im);
            }
        }
        HermitianGenerator::new(m).unwrap().exp(1.0).unwrap()
    }

    fn random_state(n: usize, seed: &[f64]) -> StateVector {
        let amps = (0..1 << n)
            .map(|k| c(seed[(2 * k) % seed.len()], seed[(2 * k + 1) % seed.len()] + 0.01))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    /// Brute-force embedding: `⟨i|E|j⟩ = ⟨i_T|U|j_T⟩ · δ(i_rest, j_rest)`.
    fn brute_embed(u: &Matrix, targets: &[usize], n: usize) -> Matrix {
        let dim = 1 << n;
        let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
        let local = |x: usize| targets.iter().fold(0, |acc, &q| (acc << 1) | bit(x, q));
        let rest_equal = |i: usize, j: usize| (0..n).filter(|q| !targets.contains(q)).all(|q| bit(i, q) == bit(j, q));
        Matrix::from_fn(dim, dim, |i, j| if rest_equal(i, j) { u[(local(i), local(j))] } else { ZERO })
    }

    fn all_orderings(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for prefix in all_orderings(n, k - 1) {
            for q in 0..n {
                if !prefix.contains(&q) {
                    let mut p = prefix.clone();
                    p.push(q);
                    out.push(p);
                }
            }
        }
        out
    }

    #[test]
    fn embed_agrees_with_brute_force_for_all_orderings() {
        let seed: Vec<f64> = (0..97).map(|k| ((k * 37 % 101) as f64 / 50.0) - 1.0).collect();
        for n in 1..=4 {
            for k in 1..=n.min(3) {
                let u = random_unitary(k, &seed[k..]);
                for targets in all_orderings(n, k) {
                    let e = u.embed(&targets, n).unwrap();
                    assert!(linalg::unitarity_deviation(e.matrix()) < 1e-10);
                    let brute = brute_embed(u.matrix(), &targets, n);
                    assert!(max_abs_diff(e.matrix(), &brute) < 1e-14, "{targets:?}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn gates_are_unitary_and_preserve_norm(seed in proptest::collection::vec(-1.0f64..1.0, 40), n in 1usize..4) {
            let u = random_unitary(n, &seed);
            prop_assert!(linalg::unitarity_deviation(u.matrix()) < 1e-10);
            let psi = random_state(n, &seed);
            let out = u.apply(&psi).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn series_composition(seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let u1 = random_unitary(2, &seed);
            let u2 = random_unitary(2, &seed[3..]);
            let psi = random_state(2, &seed[5..]);
            let stepwise = u2.apply(&u1.apply(&psi).unwrap()).unwrap();
            let product = u2.compose(&u1).unwrap().apply(&psi).unwrap();
            for (x, y) in stepwise.amplitudes().iter().zip(product.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
        }

        #[test]
        fn parallel_composition(seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let u1 = random_unitary(1, &seed);
            let u2 = random_unitary(2, &seed[7..]);
            let a = random_state(1, &seed[2..]);
            let b = random_state(2, &seed[9..]);
            let joint = u1.kron(&u2).apply(&a.tensor(&b).unwrap()).unwrap();
            let separate = u1.apply(&a).unwrap().tensor(&u2.apply(&b).unwrap()).unwrap();
            for (x, y) in joint.amplitudes().iter().zip(separate.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
        }

        #[test]
        fn local_apply_matches_embedding(seed in proptest::collection::vec(-1.0f64..1.0, 40), t0 in 0usize..3, t1 in 0usize..3) {
            prop_assume!(t0 != t1);
            let u = random_unitary(2, &seed);
            let psi = random_state(3, &seed[4..]);
            let local = u.apply_on(&psi, &[t0, t1]).unwrap();
            let dense = u.embed(&[t0, t1], 3).unwrap().apply(&psi).unwrap();
            for (x, y) in local.amplitudes().iter().zip(dense.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
