//! Projective measurement: spectral decomposition of observables, outcome
//! sampling, collapse, and shot-based expectation estimation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gates::Pauli;
use crate::linalg::{self, c, Matrix, C64, ZERO};
use crate::state::StateVector;
use crate::{Error, Result};

/// Eigenvalues closer than this are treated as one degenerate eigenvalue.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Probabilities below this are clamped to zero before sampling.
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Orthogonal projector onto one eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    /// Diagonal in the computational basis; `mask[x]` selects basis state `x`.
    Diagonal(Vec<bool>),
    Dense(Matrix),
}

impl Projector {
    pub fn dim(&self) -> usize {
        match self {
            Projector::Diagonal(mask) => mask.len(),
            Projector::Dense(m) => m.nrows(),
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        match self {
            Projector::Diagonal(mask) => Matrix::from_fn(mask.len(), mask.len(), |r, col| {
                if r == col && mask[r] {
                    c(1.0, 0.0)
                } else {
                    ZERO
                }
            }),
            Projector::Dense(m) => m.clone(),
        }
    }

    /// `P|v⟩` (unnormalized).
    pub fn project(&self, amps: &[C64]) -> Vec<C64> {
        match self {
            Projector::Diagonal(mask) => amps
                .iter()
                .zip(mask)
                .map(|(a, &keep)| if keep { *a } else { ZERO })
                .collect(),
            Projector::Dense(m) => (m * nalgebra::DVector::from_column_slice(amps))
                .iter()
                .copied()
                .collect(),
        }
    }

    /// `⟨v|P|v⟩`.
    pub fn weight(&self, amps: &[C64]) -> f64 {
        match self {
            Projector::Diagonal(mask) => amps
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(a, _)| a.norm_sqr())
                .sum(),
            Projector::Dense(_) => {
                let projected = self.project(amps);
                amps.iter().zip(&projected).map(|(a, p)| (a.conj() * p).re).sum()
            }
        }
    }

    /// `tr(P ρ)`.
    pub fn trace_with(&self, rho: &Matrix) -> f64 {
        match self {
            Projector::Diagonal(mask) => mask
                .iter()
                .enumerate()
                .filter(|(_, &keep)| keep)
                .map(|(i, _)| rho[(i, i)].re)
                .sum(),
            Projector::Dense(p) => p.iter().zip(rho.transpose().iter()).map(|(a, b)| (a * b).re).sum(),
        }
    }

    /// `P ρ P`.
    pub fn sandwich(&self, rho: &Matrix) -> Matrix {
        match self {
            Projector::Diagonal(mask) => Matrix::from_fn(rho.nrows(), rho.ncols(), |r, col| {
                if mask[r] && mask[col] {
                    rho[(r, col)]
                } else {
                    ZERO
                }
            }),
            Projector::Dense(p) => p * rho * p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Dense(Matrix),
    Diagonal(Vec<f64>),
}

/// Hermitian observable `M = Σ λ_i P_i` with its spectral decomposition.
///
/// Eigenvalues are distinct (degenerate eigenvalues grouped into one
/// projector) and sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    repr: Repr,
    eigenvalues: Vec<f64>,
    projectors: Vec<Projector>,
    name: Option<String>,
}

impl Observable {
    /// Spectral decomposition of a Hermitian matrix.
    pub fn spectral(m: &Matrix) -> Result<Self> {
        let n_qubits = dims_to_qubits(m)?;
        let deviation = linalg::hermiticity_deviation(m);
        if !(deviation < crate::gates::HERMITIAN_TOLERANCE) {
            return Err(Error::NotHermitian { deviation });
        }
        if is_diagonal(m) {
            let values: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].re).collect();
            return Self::diagonal(&values);
        }
        let (values, vectors) = linalg::hermitian_eigen(m);
        let dim = m.nrows();
        let mut eigenvalues = Vec::new();
        let mut projectors = Vec::new();
        // values ascend; walk from the top so eigenvalues come out descending
        let mut k = dim;
        while k > 0 {
            let top = values[k - 1];
            let mut p = Matrix::zeros(dim, dim);
            let mut sum = 0.0;
            let mut count = 0;
            while k > 0 && (top - values[k - 1]).abs() <= DEGENERACY_THRESHOLD {
                let v = vectors.column(k - 1);
                p += v * v.adjoint();
                sum += values[k - 1];
                count += 1;
                k -= 1;
            }
            eigenvalues.push(sum / count as f64);
            projectors.push(Projector::Dense(p));
        }
        Ok(Self {
            n_qubits,
            repr: Repr::Dense(m.clone()),
            eigenvalues,
            projectors,
            name: None,
        })
    }

    /// Observable diagonal in the computational basis.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n_qubits = linalg::qubits_for_dim(values.len())
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::InvalidArgument("diagonal length must be 2^n".into()))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observable entry".into()));
        }
        let mut distinct: Vec<f64> = values.to_vec();
        distinct.sort_by(|a, b| b.total_cmp(a));
        let mut groups: Vec<f64> = Vec::new();
        for v in distinct {
            if groups.last().map_or(true, |&g| (g - v).abs() > DEGENERACY_THRESHOLD) {
                groups.push(v);
            }
        }
        let projectors = groups
            .iter()
            .map(|&g| {
                Projector::Diagonal(
                    values
                        .iter()
                        .map(|&v| (v - g).abs() <= DEGENERACY_THRESHOLD)
                        .collect(),
                )
            })
            .collect();
        Ok(Self {
            n_qubits,
            repr: Repr::Diagonal(values.to_vec()),
            eigenvalues: groups,
            projectors,
            name: None,
        })
    }

    /// Builds an observable from an explicit projective measurement
    /// `{(λ_i, P_i)}`, checking completeness and orthogonality.
    pub fn from_projectors(outcomes: Vec<(f64, Projector)>) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::InvalidArgument("no projectors".into()))?;
        let dim = first.1.dim();
        let n_qubits = linalg::qubits_for_dim(dim)
            .ok_or_else(|| Error::InvalidArgument("projector dimension must be 2^n".into()))?;
        let mats: Vec<Matrix> = outcomes.iter().map(|(_, p)| p.to_matrix()).collect();
        if mats.iter().any(|m| m.nrows() != dim) {
            return Err(Error::InvalidArgument("projectors of differing dimension".into()));
        }
        let total: Matrix = mats.iter().fold(Matrix::zeros(dim, dim), |acc, m| acc + m);
        if linalg::frobenius_distance(&total, &linalg::identity(dim)) > 1e-9 {
            return Err(Error::InvalidArgument("projectors do not sum to the identity".into()));
        }
        for (i, a) in mats.iter().enumerate() {
            for (j, b) in mats.iter().enumerate() {
                let expected = if i == j { a.clone() } else { Matrix::zeros(dim, dim) };
                if linalg::frobenius_distance(&(a * b), &expected) > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "projectors {i} and {j} are not orthogonal idempotents"
                    )));
                }
            }
        }
        let all_diagonal = outcomes
            .iter()
            .all(|(_, p)| matches!(p, Projector::Diagonal(_)));
        let repr = if all_diagonal {
            let mut diag = vec![0.0; dim];
            for (lambda, p) in &outcomes {
                if let Projector::Diagonal(mask) = p {
                    for (d, &m) in diag.iter_mut().zip(mask) {
                        if m {
                            *d = *lambda;
                        }
                    }
                }
            }
            Repr::Diagonal(diag)
        } else {
            Repr::Dense(
                outcomes
                    .iter()
                    .zip(&mats)
                    .fold(Matrix::zeros(dim, dim), |acc, ((l, _), m)| acc + m.scale(*l)),
            )
        };
        let (eigenvalues, projectors) = outcomes.into_iter().unzip();
        Ok(Self {
            n_qubits,
            repr,
            eigenvalues,
            projectors,
            name: None,
        })
    }

    /// `Z^{⊗n}`, the default readout observable.
    pub fn z_all(n_qubits: usize) -> Result<Self> {
        let pauli = "Z".repeat(n_qubits);
        Self::pauli_string(&pauli)
    }

    /// Tensor product of Paulis, e.g. `"ZZI"` (qubit 0 first).
    pub fn pauli_string(spec: &str) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        let all_diag = spec.chars().all(|ch| matches!(ch.to_ascii_uppercase(), 'Z' | 'I'));
        let obs = if all_diag {
            let n = spec.len();
            let zs: Vec<usize> = spec
                .chars()
                .enumerate()
                .filter(|(_, ch)| ch.eq_ignore_ascii_case(&'Z'))
                .map(|(q, _)| q)
                .collect();
            let values: Vec<f64> = (0..1usize << n)
                .map(|x| {
                    let parity = zs.iter().filter(|&&q| (x >> (n - 1 - q)) & 1 == 1).count();
                    if parity % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            Self::diagonal(&values)?
        } else {
            let mut m = linalg::identity(1);
            for ch in spec.chars() {
                let factor = match ch.to_ascii_uppercase() {
                    'I' => linalg::identity(2),
                    other => Pauli::from_char(other)
                        .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli `{ch}`")))?
                        .matrix(),
                };
                m = linalg::kron(&m, &factor);
            }
            Self::spectral(&m)?
        };
        Ok(obs.named(spec.to_ascii_uppercase()))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal(_))
    }

    /// Diagonal entries when the observable is diagonal in the computational basis.
    pub fn diagonal_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d),
            Repr::Dense(_) => None,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn matrix(&self) -> Matrix {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Diagonal(d) => Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d.len(),
                d.iter().map(|&x| c(x, 0.0)),
            )),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }

    /// `p_i = ⟨ψ|P_i|ψ⟩` for each eigenvalue.
    pub fn outcome_probabilities(&self, psi: &StateVector) -> Result<Vec<(f64, f64)>> {
        self.check_dim(psi.dim())?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(&self.projectors)
            .map(|(&l, p)| (l, p.weight(psi.amplitudes()).max(0.0)))
            .collect())
    }

    /// Samples one outcome and collapses the state onto its eigenspace.
    pub fn measure_once<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        let probs: Vec<f64> = self
            .outcome_probabilities(psi)?
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        let index = sample_index(&probs, rng);
        self.collapse(psi, index)
    }

    /// Post-measurement state for a given outcome: `P_i|ψ⟩ / √⟨ψ|P_i|ψ⟩`.
    pub fn collapse(&self, psi: &StateVector, index: usize) -> Result<MeasurementRecord> {
        self.check_dim(psi.dim())?;
        let projector = self.projectors.get(index).ok_or(Error::IndexOutOfRange {
            index,
            bound: self.projectors.len(),
        })?;
        let projected = projector.project(psi.amplitudes());
        let probability: f64 = projected.iter().map(|a| a.norm_sqr()).sum();
        if probability < PROBABILITY_FLOOR {
            return Err(Error::ZeroProbability { index });
        }
        let post_state = StateVector::normalized(projected)?;
        Ok(MeasurementRecord {
            outcome: self.eigenvalues[index],
            outcome_index: index,
            probability,
            post_state,
        })
    }

    /// Exact `⟨ψ|M|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        self.check_dim(psi.dim())?;
        let amps = psi.amplitudes();
        let value = match &self.repr {
            Repr::Diagonal(d) => amps.iter().zip(d).map(|(a, &x)| a.norm_sqr() * x).sum::<f64>(),
            Repr::Dense(m) => {
                let mv = m * nalgebra::DVector::from_column_slice(amps);
                let z: C64 = amps.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum();
                debug_assert!(z.im.abs() < 1e-8);
                z.re
            }
        };
        Ok(value)
    }

    /// `tr(M ρ)` for a density matrix given as a raw matrix.
    pub(crate) fn expectation_matrix(&self, rho: &Matrix) -> Result<f64> {
        self.check_dim(rho.nrows())?;
        Ok(match &self.repr {
            Repr::Diagonal(d) => d.iter().enumerate().map(|(i, &x)| x * rho[(i, i)].re).sum(),
            Repr::Dense(m) => m
                .iter()
                .zip(rho.transpose().iter())
                .map(|(a, b)| (a * b).re)
                .sum(),
        })
    }

    /// Shot-based estimate `Σ λ_i T_i / T` with its standard error.
    pub fn estimate_expectation<R: Rng + ?Sized>(
        &self,
        psi: &StateVector,
        shots: usize,
        rng: &mut R,
    ) -> Result<Estimate> {
        let probs: Vec<f64> = self
            .outcome_probabilities(psi)?
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        estimate_from_probabilities(&self.eigenvalues, &probs, shots, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub outcome: f64,
    pub outcome_index: usize,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Sample mean of measured eigenvalues and its standard error
/// (sample standard deviation over `√shots`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub shots: usize,
}

/// Draws an index with probability proportional to `probs` (entries below
/// [`PROBABILITY_FLOOR`] never drawn).
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let clean = |p: f64| if p < PROBABILITY_FLOOR { 0.0 } else { p };
    let total: f64 = probs.iter().map(|&p| clean(p)).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        let p = clean(p);
        if p == 0.0 {
            continue;
        }
        last = i;
        if u < p {
            return i;
        }
        u -= p;
    }
    last
}

/// Per-outcome counts from `shots` independent draws.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: usize, rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0; probs.len()];
    for _ in 0..shots {
        counts[sample_index(probs, rng)] += 1;
    }
    counts
}

pub(crate) fn estimate_from_probabilities<R: Rng + ?Sized>(
    eigenvalues: &[f64],
    probs: &[f64],
    shots: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let counts = sample_counts(probs, shots, rng);
    Ok(estimate_from_counts(eigenvalues, &counts))
}

pub(crate) fn estimate_from_counts(eigenvalues: &[f64], counts: &[usize]) -> Estimate {
    let shots: usize = counts.iter().sum();
    let t = shots as f64;
    let mean = eigenvalues
        .iter()
        .zip(counts)
        .map(|(&l, &n)| l * n as f64)
        .sum::<f64>()
        / t;
    let stderr = if shots > 1 {
        let ss: f64 = eigenvalues
            .iter()
            .zip(counts)
            .map(|(&l, &n)| n as f64 * (l - mean).powi(2))
            .sum();
        (ss / (t - 1.0)).sqrt() / t.sqrt()
    } else {
        0.0
    };
    Estimate {
        estimate: mean,
        stderr,
        shots,
    }
}

fn dims_to_qubits(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    linalg::qubits_for_dim(m.nrows())
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::InvalidArgument("observable dimension must be 2^n".into()))
}

fn is_diagonal(m: &Matrix) -> bool {
    (0..m.nrows()).all(|r| (0..m.ncols()).all(|col| r == col || m[(r, col)].norm() == 0.0))
}
