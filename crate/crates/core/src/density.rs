//! Mixed states as dense density matrices.
//!
//! Gates and Kraus operators are applied by treating the `2^n × 2^n` matrix
//! as a `2n`-qubit amplitude vector: with nalgebra's column-major storage the
//! column index supplies the high bits, so row qubit `q` is register qubit
//! `n + q` and column qubit `q` is register qubit `q`. Then
//! `E ρ E† = (E ⊗ E*)|ρ⟩⟩` reduces to two small local applications.

use rand::Rng;

use crate::gates::Gate;
use crate::linalg::{self, c, Matrix, C64};
use crate::measure::{Estimate, Observable};
use crate::state::StateVector;
use crate::{Error, Result};

pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Register bound for density-matrix simulation (`4^n` memory growth).
pub const MAX_DENSITY_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: Matrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: Matrix) -> Result<Self> {
        let n_qubits = linalg::qubits_for_dim(matrix.nrows())
            .filter(|&n| n >= 1 && matrix.nrows() == matrix.ncols())
            .ok_or_else(|| Error::InvalidDensity("matrix must be 2^n × 2^n".into()))?;
        check_register(n_qubits)?;
        let herm = linalg::hermiticity_deviation(&matrix);
        if herm > TRACE_TOLERANCE {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {tr} ≠ 1")));
        }
        let (values, _) = linalg::hermitian_eigen(&matrix);
        if values[0] < -TRACE_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {}",
                values[0]
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        check_register(psi.n_qubits())?;
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Ok(Self {
            n_qubits: psi.n_qubits(),
            matrix: &v * v.adjoint(),
        })
    }

    /// `Σ p_i |ψ_i⟩⟨ψ_i|`.
    pub fn from_ensemble(states: &[StateVector], probs: &[f64]) -> Result<Self> {
        if states.is_empty() || states.len() != probs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} states but {} probabilities",
                states.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
        }
        let n = states[0].n_qubits();
        check_register(n)?;
        let dim = 1 << n;
        let mut matrix = Matrix::zeros(dim, dim);
        for (psi, &p) in states.iter().zip(probs) {
            if psi.n_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: psi.n_qubits(),
                });
            }
            let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
            matrix += (&v * v.adjoint()).scale(p);
        }
        Ok(Self { n_qubits: n, matrix })
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(Self {
            n_qubits,
            matrix: linalg::identity(dim).scale(1.0 / dim as f64),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix).0
    }

    /// Checks the density-matrix invariants within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let tr = self.trace();
        linalg::hermiticity_deviation(&self.matrix) <= tol
            && (tr.re - 1.0).abs() <= tol
            && tr.im.abs() <= tol
            && self.eigenvalues()[0] >= -tol
    }

    /// `ρ ⊗ σ`.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.n_qubits + other.n_qubits;
        check_register(n)?;
        Ok(Self {
            n_qubits: n,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        })
    }

    /// `U ρ U†` for a gate spanning the whole register.
    pub fn apply_gate(&self, u: &Gate) -> Result<DensityMatrix> {
        if u.arity() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: u.arity(),
            });
        }
        let targets: Vec<usize> = (0..self.n_qubits).collect();
        self.apply_gate_on(u, &targets)
    }

    /// `U ρ U†` with `U` acting on `targets`.
    pub fn apply_gate_on(&self, u: &Gate, targets: &[usize]) -> Result<DensityMatrix> {
        u.check_targets(targets, self.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits,
            matrix: self.conjugated(u.matrix(), targets),
        })
    }

    /// `E ρ E†` for an arbitrary (not necessarily unitary) local operator.
    pub(crate) fn conjugated(&self, op: &Matrix, targets: &[usize]) -> Matrix {
        let n = self.n_qubits;
        let mut out = self.matrix.clone();
        let row_targets: Vec<usize> = targets.iter().map(|q| q + n).collect();
        let conj = op.map(|z| z.conj());
        let slice = out.as_mut_slice();
        linalg::apply_local(slice, 2 * n, &row_targets, op);
        linalg::apply_local(slice, 2 * n, targets, &conj);
        out
    }

    /// `Σ_j E_j ρ E_j†`.
    pub(crate) fn apply_operators(&self, ops: &[Matrix], targets: &[usize]) -> DensityMatrix {
        let dim = self.dim();
        let matrix = ops
            .iter()
            .fold(Matrix::zeros(dim, dim), |acc, e| acc + self.conjugated(e, targets));
        Self {
            n_qubits: self.n_qubits,
            matrix,
        }
    }

    /// `p_i = tr(P_i ρ)` for each eigenvalue of `obs`.
    pub fn measure_probabilities(&self, obs: &Observable) -> Result<Vec<(f64, f64)>> {
        self.check_dim(obs.dim())?;
        Ok(obs
            .eigenvalues()
            .iter()
            .zip(obs.projectors())
            .map(|(&l, p)| (l, p.trace_with(&self.matrix).max(0.0)))
            .collect())
    }

    /// `P_i ρ P_i / tr(P_i ρ)`.
    pub fn collapse(&self, obs: &Observable, index: usize) -> Result<DensityMatrix> {
        self.check_dim(obs.dim())?;
        let p = obs.projectors().get(index).ok_or(Error::IndexOutOfRange {
            index,
            bound: obs.projectors().len(),
        })?;
        let weight = p.trace_with(&self.matrix);
        if weight <= crate::measure::PROBABILITY_FLOOR {
            return Err(Error::ZeroProbability { index });
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            matrix: p.sandwich(&self.matrix).scale(1.0 / weight),
        })
    }

    /// `tr(M ρ)`.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        obs.expectation_matrix(&self.matrix)
    }

    /// Shot-based estimate of `tr(M ρ)`.
    pub fn estimate_expectation<R: Rng + ?Sized>(
        &self,
        obs: &Observable,
        shots: usize,
        rng: &mut R,
    ) -> Result<Estimate> {
        let probs: Vec<f64> = self
            .measure_probabilities(obs)?
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        crate::measure::estimate_from_probabilities(obs.eigenvalues(), &probs, shots, rng)
    }

    /// Reduced state on `keep` (output qubits in ascending original order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits;
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.len() >= n {
            return Err(Error::InvalidTargets(format!(
                "keep set must be a nonempty proper subset of 0..{n}"
            )));
        }
        linalg::validate_targets(&keep, n)?;
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let (_, keep_offsets) = linalg::local_offsets(n, &keep);
        let (_, traced_offsets) = linalg::local_offsets(n, &traced);
        let k = keep_offsets.len();
        let mut out = Matrix::zeros(k, k);
        for (r, roff) in keep_offsets.iter().enumerate() {
            for (col, coff) in keep_offsets.iter().enumerate() {
                out[(r, col)] = traced_offsets
                    .iter()
                    .map(|t| self.matrix[(roff | t, coff | t)])
                    .sum();
            }
        }
        Ok(Self {
            n_qubits: keep.len(),
            matrix: out,
        })
    }

    /// `½ tr|ρ − σ|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_dim(other.dim())?;
        let (values, _) = linalg::hermitian_eigen(&(&self.matrix - &other.matrix));
        Ok((0.5 * values.iter().map(|v| v.abs()).sum::<f64>()).min(1.0))
    }

    /// `tr √(√σ ρ √σ)`, equal to `|⟨ψ₁|ψ₂⟩|` for pure states.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_dim(other.dim())?;
        let root = linalg::sqrt_psd(&other.matrix);
        let inner = &root * &self.matrix * &root;
        let (values, _) = linalg::hermitian_eigen(&inner);
        Ok(values.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>().clamp(0.0, 1.0))
    }

    /// `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a single-qubit state.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.n_qubits != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.n_qubits,
            });
        }
        let m = &self.matrix;
        Ok([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }

    /// Single-qubit state from a Bloch vector `r` with `|r| ≤ 1`.
    pub fn from_bloch_vector(r: [f64; 3]) -> Result<DensityMatrix> {
        let [x, y, z] = r;
        Self::new(linalg::matrix(
            2,
            &[
                c((1.0 + z) / 2.0, 0.0),
                c(x / 2.0, -y / 2.0),
                c(x / 2.0, y / 2.0),
                c((1.0 - z) / 2.0, 0.0),
            ],
        ))
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
}

fn check_register(n: usize) -> Result<()> {
    if n > MAX_DENSITY_QUBITS {
        return Err(Error::RegisterTooLarge {
            n,
            max: MAX_DENSITY_QUBITS,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{hadamard, pauli, rotation, Pauli};
    use crate::state::BellState;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ket(bits: &str) -> StateVector {
        StateVector::from_bits(bits).unwrap()
    }

    fn pure(bits: &str) -> DensityMatrix {
        DensityMatrix::from_pure(&ket(bits)).unwrap()
    }

    fn close(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> bool {
        linalg::max_abs_diff(a.matrix(), b.matrix()) < tol
    }

    fn caption_ensemble() -> DensityMatrix {
        let plus_i = StateVector::qubit(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)).unwrap();
        DensityMatrix::from_ensemble(
            &[StateVector::plus(), StateVector::minus(), plus_i],
            &[0.2, 0.4, 0.4],
        )
        .unwrap()
    }

    #[test]
    fn ensemble_examples() {
        let mixed = DensityMatrix::from_ensemble(&[ket("0"), ket("1")], &[0.5, 0.5]).unwrap();
        assert!(close(&mixed, &DensityMatrix::maximally_mixed(1).unwrap(), 1e-15));
        let psi = StateVector::bell(BellState::PsiPlus);
        let rho = DensityMatrix::from_ensemble(&[psi], &[1.0]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((caption_ensemble().purity() - 0.6).abs() < 1e-10);
    }

    #[test]
    fn ensemble_errors() {
        assert!(DensityMatrix::from_ensemble(&[ket("0")], &[0.5]).is_err());
        assert!(DensityMatrix::from_ensemble(&[ket("0"), ket("1")], &[1.5, -0.5]).is_err());
        assert!(DensityMatrix::from_ensemble(&[ket("0"), ket("01")], &[0.5, 0.5]).is_err());
        assert!(DensityMatrix::from_ensemble(&[], &[]).is_err());
    }

    #[test]
    fn purity_examples() {
        assert!((pure("0").purity() - 1.0).abs() < 1e-15);
        assert!((DensityMatrix::maximally_mixed(1).unwrap().purity() - 0.5).abs() < 1e-15);
        for n in 1..=4 {
            let p = DensityMatrix::maximally_mixed(n).unwrap().purity();
            assert!((p - 0.5f64.powi(n as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn gate_examples() {
        let flipped = pure("0").apply_gate(&pauli(Pauli::X)).unwrap();
        assert!(close(&flipped, &pure("1"), 1e-15));
        let plus = pure("0").apply_gate(&hadamard()).unwrap();
        assert!(close(&plus, &DensityMatrix::from_pure(&StateVector::plus()).unwrap(), 1e-15));
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        let rotated = mixed.apply_gate(&rotation(Pauli::Y, 0.8).unwrap()).unwrap();
        assert!(close(&rotated, &mixed, 1e-15));
        assert!(mixed.apply_gate(&crate::gates::cnot()).is_err());
    }

    #[test]
    fn measurement_examples() {
        let z = Observable::z_all(1).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert_eq!(mixed.measure_probabilities(&z).unwrap(), vec![(1.0, 0.5), (-1.0, 0.5)]);

        let psi = StateVector::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let x = Observable::pauli_string("X").unwrap();
        let sv = x.outcome_probabilities(&psi).unwrap();
        let dm = rho.measure_probabilities(&x).unwrap();
        for ((_, a), (_, b)) in sv.iter().zip(&dm) {
            assert!((a - b).abs() < 1e-12);
        }
        let sv_post = x.collapse(&psi, 0).unwrap().post_state;
        let dm_post = rho.collapse(&x, 0).unwrap();
        assert!(close(&dm_post, &DensityMatrix::from_pure(&sv_post).unwrap(), 1e-12));

        let plus = DensityMatrix::from_pure(&StateVector::plus()).unwrap();
        assert!(close(&plus.collapse(&z, 0).unwrap(), &pure("0"), 1e-12));
        assert!(matches!(pure("0").collapse(&z, 1), Err(Error::ZeroProbability { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let a = DensityMatrix::from_pure(&StateVector::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap()).unwrap();
        let b = caption_ensemble();
        let ab = a.tensor(&b).unwrap();
        assert!(close(&ab.partial_trace(&[0]).unwrap(), &a, 1e-14));
        assert!(close(&ab.partial_trace(&[1]).unwrap(), &b, 1e-14));

        let bell = DensityMatrix::from_pure(&StateVector::bell(BellState::PhiPlus)).unwrap();
        let half = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(close(&bell.partial_trace(&[0]).unwrap(), &half, 1e-10));
        assert!(close(&bell.partial_trace(&[1]).unwrap(), &half, 1e-10));

        assert!(close(&pure("00").partial_trace(&[0]).unwrap(), &pure("0"), 1e-15));
        assert!(pure("00").partial_trace(&[]).is_err());
        assert!(pure("00").partial_trace(&[0, 1]).is_err());
        // non-adjacent kept qubits of a product state
        let abc = pure("101");
        assert!(close(&abc.partial_trace(&[0, 2]).unwrap(), &pure("11"), 1e-15));
    }

    #[test]
    fn distance_examples() {
        let rho = caption_ensemble();
        assert!(rho.trace_distance(&rho).unwrap().abs() < 1e-12);
        assert!((pure("0").trace_distance(&pure("1")).unwrap() - 1.0).abs() < 1e-12);
        assert!((rho.fidelity(&rho).unwrap() - 1.0).abs() < 1e-10);
        assert!(pure("0").fidelity(&pure("1")).unwrap().abs() < 1e-7);
        assert!(pure("0").trace_distance(&pure("01")).is_err());
    }

    fn arb_bloch() -> impl Strategy<Value = [f64; 3]> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y, z, r)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-9);
            [r * x / n, r * y / n, r * z / n]
        })
    }

    fn arb_qubit() -> impl Strategy<Value = StateVector> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(a, b, x, y)| a * a + b * b + x * x + y * y > 1e-3)
            .prop_map(|(a, b, x, y)| StateVector::normalized(vec![c(a, b), c(x, y)]).unwrap())
    }

    fn arb_mixed(n: usize) -> impl Strategy<Value = DensityMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), (1 << n) * 3).prop_map(move |v| {
            let states: Vec<StateVector> = v
                .chunks(1 << n)
                .map(|ch| StateVector::normalized(ch.iter().map(|&(a, b)| c(a, b + 1e-3)).collect()).unwrap())
                .collect();
            DensityMatrix::from_ensemble(&states, &[0.5, 0.3, 0.2]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn single_qubit_trace_distance_is_half_bloch_distance(r in arb_bloch(), s in arb_bloch()) {
            let rho = DensityMatrix::from_bloch_vector(r).unwrap();
            let sigma = DensityMatrix::from_bloch_vector(s).unwrap();
            let euclid = ((r[0] - s[0]).powi(2) + (r[1] - s[1]).powi(2) + (r[2] - s[2]).powi(2)).sqrt();
            prop_assert!((rho.trace_distance(&sigma).unwrap() - euclid / 2.0).abs() < 1e-10);
            let back = rho.bloch_vector().unwrap();
            for k in 0..3 { prop_assert!((back[k] - r[k]).abs() < 1e-12); }
        }

        #[test]
        fn pure_state_distance_fidelity_relation(a in arb_qubit(), b in arb_qubit()) {
            let ra = DensityMatrix::from_pure(&a).unwrap();
            let rb = DensityMatrix::from_pure(&b).unwrap();
            let f = ra.fidelity(&rb).unwrap();
            let overlap = a.overlap(&b).unwrap();
            prop_assert!((f - overlap).abs() < 1e-6);
            let d = ra.trace_distance(&rb).unwrap();
            prop_assert!((d - (1.0 - overlap * overlap).max(0.0).sqrt()).abs() < 1e-9);
        }

        #[test]
        fn triangle_inequality(a in arb_mixed(2), b in arb_mixed(2), d in arb_mixed(2)) {
            let ab = a.trace_distance(&b).unwrap();
            let bd = b.trace_distance(&d).unwrap();
            let ad = a.trace_distance(&d).unwrap();
            prop_assert!(ad <= ab + bd + 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn partial_trace_is_linear(a in arb_mixed(3), b in arb_mixed(3), alpha in 0.0f64..1.0) {
            let mix = DensityMatrix::new(a.matrix().scale(alpha) + b.matrix().scale(1.0 - alpha)).unwrap();
            for keep in [vec![0], vec![1, 2], vec![0, 2]] {
                let lhs = mix.partial_trace(&keep).unwrap();
                let rhs = a.partial_trace(&keep).unwrap().matrix().scale(alpha)
                    + b.partial_trace(&keep).unwrap().matrix().scale(1.0 - alpha);
                prop_assert!(linalg::max_abs_diff(lhs.matrix(), &rhs) < 1e-10);
                prop_assert!((lhs.trace().re - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn outputs_stay_valid(a in arb_mixed(2), theta in -3.0f64..3.0) {
            let u = rotation(Pauli::X, theta).unwrap();
            let out = a.apply_gate_on(&u, &[1]).unwrap();
            prop_assert!(out.is_valid(1e-9));
            prop_assert!(out.purity() <= 1.0 + 1e-10);
            prop_assert!((out.purity() - a.purity()).abs() < 1e-10);
        }
    }
}
