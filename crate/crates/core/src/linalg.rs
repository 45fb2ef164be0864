//! Dense complex linear algebra helpers shared by the simulators.
//!
//! Qubit `q` of an `n`-qubit register lives at bit position `n - 1 - q` of a
//! basis index, so qubit 0 is the most significant bit. A list of targets is
//! read the same way: `targets[0]` is the most significant bit of the local
//! index of a small operator.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a square matrix from row-major entries.
pub fn matrix(dim: usize, rows: &[C64]) -> Matrix {
    assert_eq!(rows.len(), dim * dim);
    Matrix::from_row_slice(dim, dim, rows)
}

pub fn real_matrix(dim: usize, rows: &[f64]) -> Matrix {
    Matrix::from_row_iterator(dim, dim, rows.iter().map(|&x| c(x, 0.0)))
}

pub fn identity(dim: usize) -> Matrix {
    Matrix::identity(dim, dim)
}

pub fn dagger(m: &Matrix) -> Matrix {
    m.adjoint()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> f64 {
    frobenius(&(a - b))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &Matrix) -> f64 {
    frobenius_distance(m, &m.adjoint())
}

pub fn unitarity_deviation(m: &Matrix) -> f64 {
    frobenius_distance(&(m.adjoint() * m), &identity(m.nrows()))
}

pub fn trace(m: &Matrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Returns `log2(dim)` when `dim` is a positive power of two.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim >= 1).then(|| dim.trailing_zeros() as usize)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Column `k` of the returned matrix is the unit eigenvector for eigenvalue `k`.
pub fn hermitian_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let dim = m.nrows();
    // Symmetrize first so the solver sees an exactly Hermitian input.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(f(λ)) V†` for a Hermitian eigendecomposition.
pub fn spectral_map(values: &[f64], vectors: &Matrix, f: impl Fn(f64) -> C64) -> Matrix {
    let dim = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        for r in 0..dim {
            scaled[(r, k)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix; negative eigenvalues are clamped to 0.
pub fn sqrt_psd(m: &Matrix) -> Matrix {
    let (values, vectors) = hermitian_eigen(m);
    spectral_map(&values, &vectors, |x| c(x.max(0.0).sqrt(), 0.0))
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &Matrix) -> f64 {
    let (values, _) = hermitian_eigen(m);
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Global index offsets for each local basis index of `targets` in an
/// `n`-qubit register.
pub(crate) fn local_offsets(n: usize, targets: &[usize]) -> (usize, Vec<usize>) {
    let k = targets.len();
    let masks: Vec<usize> = targets.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let full = masks.iter().fold(0, |acc, m| acc | m);
    let offsets = (0..1usize << k)
        .map(|local| {
            (0..k)
                .filter(|&i| (local >> (k - 1 - i)) & 1 == 1)
                .fold(0, |acc, i| acc | masks[i])
        })
        .collect();
    (full, offsets)
}

/// Applies a `2^k × 2^k` operator to `targets` of an `n`-qubit amplitude
/// vector in place, without forming the `2^n × 2^n` embedding.
pub(crate) fn apply_local(amps: &mut [C64], n: usize, targets: &[usize], op: &Matrix) {
    debug_assert_eq!(amps.len(), 1 << n);
    debug_assert_eq!(op.nrows(), 1 << targets.len());
    let (target_mask, offsets) = local_offsets(n, targets);
    let local_dim = offsets.len();
    let mut buf = vec![ZERO; local_dim];
    for base in 0..amps.len() {
        if base & target_mask != 0 {
            continue;
        }
        for (slot, off) in buf.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (col, value) in buf.iter().enumerate() {
                acc += op[(r, col)] * value;
            }
            amps[base | off] = acc;
        }
    }
}

/// Dense `2^n × 2^n` embedding of a local operator, built by basis-index
/// arithmetic rather than Kronecker products with identities.
pub(crate) fn embed_dense(op: &Matrix, targets: &[usize], n: usize) -> Matrix {
    let dim = 1usize << n;
    let (target_mask, offsets) = local_offsets(n, targets);
    let mut out = Matrix::zeros(dim, dim);
    for base in (0..dim).filter(|b| b & target_mask == 0) {
        for (r, roff) in offsets.iter().enumerate() {
            for (col, coff) in offsets.iter().enumerate() {
                out[(base | roff, base | coff)] = op[(r, col)];
            }
        }
    }
    out
}

pub(crate) fn validate_targets(targets: &[usize], n: usize) -> crate::Result<()> {
    for (i, &q) in targets.iter().enumerate() {
        if q >= n {
            return Err(crate::Error::InvalidTargets(format!(
                "qubit {q} out of range for a {n}-qubit register"
            )));
        }
        if targets[..i].contains(&q) {
            return Err(crate::Error::InvalidTargets(format!(
                "qubit {q} listed twice"
            )));
        }
    }
    Ok(())
}
