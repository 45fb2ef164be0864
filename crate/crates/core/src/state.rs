//! Pure states of an `n`-qubit register.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{c, C64, ONE, ZERO};
use crate::{Error, Result};

/// Tolerance on `‖ψ‖₂ − 1` accepted without modification.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Largest drift silently absorbed by renormalization.
pub const RENORMALIZE_LIMIT: f64 = 1e-8;
/// Default register bound for state-vector simulation (16 MiB of amplitudes).
pub const DEFAULT_MAX_QUBITS: usize = 20;

/// Unit-norm amplitude vector over the computational basis.
///
/// Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of
/// a basis index: `|q0 q1 … q_{n-1}⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochCoordinates {
    /// Polar angle in `[0, π]`.
    pub theta: f64,
    /// Azimuth in `[0, 2π)`; zero at the poles.
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl StateVector {
    /// Validates and, for drift up to [`RENORMALIZE_LIMIT`], renormalizes.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::with_limit(amplitudes, DEFAULT_MAX_QUBITS)
    }

    pub fn with_limit(mut amplitudes: Vec<C64>, max_qubits: usize) -> Result<Self> {
        let n_qubits = crate::linalg::qubits_for_dim(amplitudes.len())
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "amplitude vector length {} is not 2^n with n ≥ 1",
                    amplitudes.len()
                ))
            })?;
        if n_qubits > max_qubits {
            return Err(Error::RegisterTooLarge {
                n: n_qubits,
                max: max_qubits,
            });
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("state amplitude".into()));
        }
        let norm = norm(&amplitudes);
        let drift = (norm - 1.0).abs();
        if drift > RENORMALIZE_LIMIT {
            return Err(Error::NotNormalized { norm });
        }
        if drift > 0.0 {
            amplitudes.iter_mut().for_each(|a| *a /= norm);
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Self::new(amplitudes)
    }

    /// Internal constructor for amplitudes produced by norm-preserving maps.
    pub(crate) fn from_unitary_image(n_qubits: usize, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be positive".into()));
        }
        if n_qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                n: n_qubits,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, bound: dim });
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Basis state from a bit string such as `"101"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let index = usize::from_str_radix(bits, 2)
            .map_err(|_| Error::InvalidArgument(format!("`{bits}` is not a bit string")))?;
        Self::basis(bits.len(), index)
    }

    /// Single-qubit `α|0⟩ + β|1⟩`.
    pub fn qubit(alpha: C64, beta: C64) -> Result<Self> {
        Self::new(vec![alpha, beta])
    }

    pub fn plus() -> Self {
        Self::from_unitary_image(1, vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)])
    }

    pub fn minus() -> Self {
        Self::from_unitary_image(1, vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)])
    }

    /// Uniform superposition `|+⟩^{⊗n}`.
    pub fn uniform(n_qubits: usize) -> Result<Self> {
        let dim = Self::zero(n_qubits)?.dim();
        let a = c(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self::from_unitary_image(n_qubits, vec![a; dim]))
    }

    pub fn bell(which: BellState) -> Self {
        let h = FRAC_1_SQRT_2;
        let amps = match which {
            BellState::PhiPlus => [h, 0.0, 0.0, h],
            BellState::PhiMinus => [h, 0.0, 0.0, -h],
            BellState::PsiPlus => [0.0, h, h, 0.0],
            BellState::PsiMinus => [0.0, h, -h, 0.0],
        };
        Self::from_unitary_image(2, amps.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn from_bloch(coords: BlochCoordinates) -> Self {
        let (s, co) = (coords.theta / 2.0).sin_cos();
        Self::from_unitary_image(1, vec![c(co, 0.0), C64::from_polar(s, coords.phi)])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// Kronecker product: `self` supplies the leading (more significant) qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > DEFAULT_MAX_QUBITS {
            return Err(Error::RegisterTooLarge {
                n,
                max: DEFAULT_MAX_QUBITS,
            });
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector::from_unitary_image(n, amplitudes))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_dim(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|`, the pure-state fidelity.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// True when the states differ only by a global phase.
    pub fn global_phase_equal(&self, other: &StateVector) -> Result<bool> {
        Ok((self.overlap(other)? - 1.0).abs() <= NORM_TOLERANCE)
    }

    /// Multiplies by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> StateVector {
        let w = C64::from_polar(1.0, phi);
        StateVector::from_unitary_image(
            self.n_qubits,
            self.amplitudes.iter().map(|a| a * w).collect(),
        )
    }

    /// Computational-basis outcome probabilities `|ψ_x|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Bloch-sphere angles of a single qubit, with the `|0⟩` amplitude
    /// rotated to be real and nonnegative and `φ = 0` at the poles.
    pub fn bloch_coordinates(&self) -> Result<BlochCoordinates> {
        if self.n_qubits != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.n_qubits,
            });
        }
        let (alpha, beta) = (self.amplitudes[0], self.amplitudes[1]);
        let theta = 2.0 * beta.norm().atan2(alpha.norm());
        let pole = alpha.norm() < 1e-12 || beta.norm() < 1e-12;
        let phi = if pole {
            0.0
        } else {
            (beta.arg() - alpha.arg()).rem_euclid(2.0 * PI)
        };
        // rem_euclid can round up to exactly 2π.
        let phi = if phi >= 2.0 * PI { 0.0 } else { phi };
        Ok(BlochCoordinates { theta, phi })
    }

    /// Bit string of a basis index in this register, qubit 0 first.
    pub fn bitstring(&self, index: usize) -> String {
        format_bits(index, self.n_qubits)
    }

    fn check_same_dim(&self, other: &StateVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)|{}⟩", a.re, a.im, self.bitstring(k))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

pub fn format_bits(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if (index >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn norm(amplitudes: &[C64]) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
