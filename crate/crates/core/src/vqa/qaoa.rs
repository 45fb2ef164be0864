//! Quantum approximate optimization over bitstring cost functions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    multi_start, CostObjective, Estimator, Generator, Layer, Mode, MultiStart, OptimizerConfig,
    ParameterizedCircuit, Slot,
};
use crate::gates::Pauli;
use crate::measure::{sample_counts, Observable};
use crate::state::{format_bits, StateVector};
use crate::{Error, Result};

/// Largest register for which the cost table is built.
pub const MAX_QAOA_QUBITS: usize = 12;

/// Coefficients below this are dropped from the Z-string expansion.
const TERM_CUTOFF: f64 = 1e-12;

/// `Q : {0,1}ⁿ → ℝ` as a table indexed by bitstring (qubit 0 most significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    n_qubits: usize,
    values: Vec<f64>,
}

impl CostFunction {
    pub fn from_fn(n_qubits: usize, q: impl Fn(&[bool]) -> f64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QAOA_QUBITS {
            return Err(Error::RegisterTooLarge {
                n: n_qubits,
                max: MAX_QAOA_QUBITS,
            });
        }
        let values = (0..1usize << n_qubits)
            .map(|x| {
                let bits: Vec<bool> = (0..n_qubits).map(|i| x >> (n_qubits - 1 - i) & 1 == 1).collect();
                q(&bits)
            })
            .collect::<Vec<_>>();
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cost value {v}")));
        }
        Ok(Self { n_qubits, values })
    }

    /// `Q(x) = -(number of edges cut by x)`, so minimizing finds a maximum cut.
    pub fn max_cut(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n_qubits || *b >= n_qubits || a == b) {
            return Err(Error::InvalidArgument(format!("bad edge ({a}, {b}) on {n_qubits} vertices")));
        }
        Self::from_fn(n_qubits, |bits| -(edges.iter().filter(|(a, b)| bits[*a] != bits[*b]).count() as f64))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The diagonal observable `C = Σ_x Q(x)|x⟩⟨x|`.
    pub fn hamiltonian(&self) -> Result<Observable> {
        Observable::diagonal(&self.values)
    }

    /// `C = Σ_S c_S Z_S` via the Walsh-Hadamard transform, omitting the
    /// constant term and negligible coefficients. Masks follow the index
    /// convention of the table.
    pub fn z_terms(&self) -> Vec<(usize, f64)> {
        let mut w = self.values.clone();
        let mut h = 1;
        while h < w.len() {
            for block in w.chunks_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = x + y;
                    *b = x - y;
                }
            }
            h *= 2;
        }
        let scale = 1.0 / w.len() as f64;
        w.iter()
            .enumerate()
            .skip(1)
            .map(|(mask, &v)| (mask, v * scale))
            .filter(|(_, v)| v.abs() > TERM_CUTOFF)
            .collect()
    }
}

/// Builds `B(β_1) C(γ_1) ⋯ B(β_p) C(γ_p)` on `|+⟩^{⊗n}`, measuring `C`.
///
/// `B(β) = Π_j e^{-iβX_j}` and `C(γ) = Π_S e^{-iγ c_S Z_S}`. Parameters are
/// `θ = (β_1, γ_1, …, β_p, γ_p)`, so `β_k` is index `2(k-1)` and `γ_k` is
/// `2(k-1) + 1`. Every layer has a two-valued spectrum, which keeps the
/// parameter-shift gradient exact.
pub fn qaoa_circuit(cost: &CostFunction, p: usize) -> Result<ParameterizedCircuit> {
    if p == 0 {
        return Err(Error::InvalidArgument("QAOA depth must be at least 1".into()));
    }
    let n = cost.n_qubits();
    let mut pc = ParameterizedCircuit::new(cost.hamiltonian()?)?.with_initial_state(StateVector::uniform(n)?)?;
    let terms = cost.z_terms();
    for k in 0..p {
        for q in 0..n {
            pc.factor(Layer::Evolve {
                generator: Generator::pauli(Pauli::X, q, 1.0),
                slot: Slot::Trainable(2 * k),
            })?;
        }
        for &(mask, coeff) in &terms {
            pc.factor(Layer::Evolve {
                generator: Generator::ZString { mask, coeff },
                slot: Slot::Trainable(2 * k + 1),
            })?;
        }
    }
    Ok(pc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaConfig {
    pub p: usize,
    pub samples: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            p: 1,
            samples: 1024,
            mode: Mode::Exact,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaResult {
    pub theta: Vec<f64>,
    /// `⟨C⟩` at the optimized parameters.
    pub expectation: f64,
    /// Best sampled bitstring and its cost.
    pub best_bitstring: String,
    pub best_value: f64,
    /// True minimum of `Q` over all bitstrings.
    pub optimum: f64,
    pub counts: BTreeMap<String, usize>,
    pub runs: MultiStart,
}

/// Optimizes the QAOA angles, then samples the final state and keeps the
/// lowest-cost bitstring seen.
pub fn qaoa(cost: &CostFunction, config: &QaoaConfig, seed: u64) -> Result<QaoaResult> {
    let circuit = qaoa_circuit(cost, config.p)?;
    let mut rng = crate::seeded_rng(seed);
    let mut objective = CostObjective::new(&circuit, Estimator::new(config.mode, seed.wrapping_add(1)));
    let runs = multi_start(&mut objective, &config.optimizer, &mut rng)?;
    let theta = runs.best().theta.clone();
    let psi = circuit.state(&theta, &[])?;
    let expectation = circuit.observable().expectation(&psi)?;
    let n = cost.n_qubits();
    if config.samples == 0 {
        return Err(Error::InvalidArgument("QAOA needs at least one sample".into()));
    }
    let raw = sample_counts(&psi.probabilities(), config.samples, &mut rng);
    let (best_index, best_value) = raw
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(x, _)| (x, cost.value(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one sample");
    let counts = raw
        .into_iter()
        .enumerate()
        .filter(|(_, k)| *k > 0)
        .map(|(x, k)| (format_bits(x, n), k))
        .collect();
    Ok(QaoaResult {
        theta,
        expectation,
        best_bitstring: format_bits(best_index, n),
        best_value,
        optimum: cost.min_value(),
        counts,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walsh_terms_of_a_ring() {
        let ring = CostFunction::max_cut(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(ring.min_value(), -4.0);
        let terms = ring.z_terms();
        assert_eq!(terms.len(), 4);
        for (mask, c) in terms {
            assert_eq!(mask.count_ones(), 2);
            assert!((c - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn z_terms_rebuild_the_table() {
        let cost = CostFunction::from_fn(3, |b| {
            let x = b.iter().filter(|&&v| v).count() as f64;
            x * x - 2.0 * (b[0] as u8 as f64) + 0.3
        })
        .unwrap();
        let mean = cost.values().iter().sum::<f64>() / 8.0;
        for x in 0..8usize {
            let v = mean
                + cost
                    .z_terms()
                    .iter()
                    .map(|(m, c)| if (x & m).count_ones() % 2 == 0 { *c } else { -c })
                    .sum::<f64>();
            assert!((v - cost.value(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(CostFunction::max_cut(3, &[(0, 3)]).is_err());
        assert!(CostFunction::from_fn(13, |_| 0.0).is_err());
        let ring = CostFunction::max_cut(3, &[(0, 1)]).unwrap();
        assert!(qaoa_circuit(&ring, 0).is_err());
    }

    #[test]
    fn zero_angles_give_the_mean_cost() {
        let ring = CostFunction::max_cut(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let pc = qaoa_circuit(&ring, 2).unwrap();
        assert_eq!(pc.n_params(), 4);
        let f = pc.evaluate_cost(&[0.0; 4], &[], &mut Estimator::Exact).unwrap();
        assert!((f + 2.0).abs() < 1e-12);
    }

    #[test]
    fn ring_of_four_finds_a_maximum_cut() {
        let ring = CostFunction::max_cut(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let res = qaoa(&ring, &QaoaConfig::default(), 11).unwrap();
        assert_eq!(res.best_value, -4.0);
        assert!(res.best_bitstring == "0101" || res.best_bitstring == "1010");
        assert!(res.expectation < -2.0);
        assert_eq!(res.counts.values().sum::<usize>(), 1024);
    }
}
