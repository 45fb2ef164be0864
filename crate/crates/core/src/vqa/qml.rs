//! Supervised regression with a data-encoding circuit `U(x, θ) = W(θ) V(x)`.

use serde::{Deserialize, Serialize};

use super::{
    gradient_descent, multi_start, Estimator, Mode, MultiStart, Objective, OptimizerConfig,
    OptimizerState, ParameterizedCircuit, Slot,
};
use crate::gates::{cnot, Pauli};
use crate::measure::Observable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Squared-error loss `Σ_i (f(x_i, θ) - y_i)²` over a training set.
#[derive(Debug, Clone)]
pub struct LossObjective<'a> {
    pub circuit: &'a ParameterizedCircuit,
    pub samples: &'a [Sample],
    pub estimator: Estimator,
}

impl<'a> LossObjective<'a> {
    pub fn new(circuit: &'a ParameterizedCircuit, samples: &'a [Sample], estimator: Estimator) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.x.len() != circuit.n_data()) {
            return Err(Error::DimensionMismatch {
                expected: circuit.n_data(),
                found: s.x.len(),
            });
        }
        Ok(Self {
            circuit,
            samples,
            estimator,
        })
    }
}

impl Objective for LossObjective<'_> {
    fn dimension(&self) -> usize {
        self.circuit.n_params()
    }

    fn cost(&mut self, theta: &[f64]) -> Result<f64> {
        let mut loss = 0.0;
        for s in self.samples {
            let f = self.circuit.evaluate_cost(theta, &s.x, &mut self.estimator)?;
            loss += (f - s.y).powi(2);
        }
        Ok(loss)
    }

    /// `Σ_i 2 (f(x_i, θ) - y_i) ∇_θ f(x_i, θ)`.
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; theta.len()];
        for s in self.samples {
            let f = self.circuit.evaluate_cost(theta, &s.x, &mut self.estimator)?;
            let g = self.circuit.parameter_shift_gradient(theta, &s.x, &mut self.estimator)?;
            for (acc, gj) in grad.iter_mut().zip(g) {
                *acc += 2.0 * (f - s.y) * gj;
            }
        }
        Ok(grad)
    }

    fn is_exact(&self) -> bool {
        self.estimator.is_exact()
    }
}

/// Angle-encoding model: `V(x)` applies `R_x(x_k)` to qubit `k mod n`, then
/// `W(θ)` runs `layers` blocks of `R_y`, `R_z` on every qubit and a CNOT chain,
/// closing with one more `R_y` block.
pub fn encoding_model(observable: Observable, n_features: usize, layers: usize) -> Result<ParameterizedCircuit> {
    let n = observable.n_qubits();
    let mut pc = ParameterizedCircuit::new(observable)?;
    for k in 0..n_features {
        pc.rotation(Pauli::X, k % n, Slot::Data(k))?;
    }
    let mut j = 0;
    for _ in 0..layers {
        for q in 0..n {
            pc.rotation(Pauli::Y, q, Slot::Trainable(j))?;
            pc.rotation(Pauli::Z, q, Slot::Trainable(j + 1))?;
            j += 2;
        }
        for q in 0..n.saturating_sub(1) {
            pc.gate(cnot(), &[q, q + 1])?;
        }
    }
    for q in 0..n {
        pc.rotation(Pauli::Y, q, Slot::Trainable(j))?;
        j += 1;
    }
    Ok(pc)
}

/// Model output `f(x, θ)` in exact mode.
pub fn predict(circuit: &ParameterizedCircuit, theta: &[f64], x: &[f64]) -> Result<f64> {
    circuit.evaluate_cost(theta, x, &mut Estimator::Exact)
}

/// Trains from `theta0`.
pub fn fit_from(
    circuit: &ParameterizedCircuit,
    samples: &[Sample],
    theta0: &[f64],
    mode: Mode,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<OptimizerState> {
    let mut objective = LossObjective::new(circuit, samples, Estimator::new(mode, seed))?;
    gradient_descent(&mut objective, theta0, config)
}

/// Trains from `config.restarts` random starts.
pub fn fit(
    circuit: &ParameterizedCircuit,
    samples: &[Sample],
    mode: Mode,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<MultiStart> {
    let mut objective = LossObjective::new(circuit, samples, Estimator::new(mode, seed.wrapping_add(1)))?;
    multi_start(&mut objective, config, &mut crate::seeded_rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let pc = encoding_model(Observable::pauli_string("ZI").unwrap(), 2, 1).unwrap();
        let samples = vec![
            Sample { x: vec![0.1, 0.7], y: 0.3 },
            Sample { x: vec![-1.0, 0.2], y: -0.5 },
        ];
        let mut obj = LossObjective::new(&pc, &samples, Estimator::Exact).unwrap();
        let mut rng = crate::seeded_rng(1);
        let theta: Vec<f64> = (0..pc.n_params()).map(|_| rng.random::<f64>() * 6.0).collect();
        let g = obj.gradient(&theta).unwrap();
        for j in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += 1e-5;
            tm[j] -= 1e-5;
            let fd = (obj.cost(&tp).unwrap() - obj.cost(&tm).unwrap()) / 2e-5;
            assert!((g[j] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_mismatched_data() {
        let pc = encoding_model(Observable::pauli_string("Z").unwrap(), 1, 1).unwrap();
        let bad = vec![Sample { x: vec![0.1, 0.2], y: 0.0 }];
        assert!(LossObjective::new(&pc, &bad, Estimator::Exact).is_err());
        assert!(LossObjective::new(&pc, &[], Estimator::Exact).is_err());
    }

    #[test]
    fn learns_a_single_qubit_teacher() {
        let pc = encoding_model(Observable::pauli_string("Z").unwrap(), 1, 1).unwrap();
        let teacher = [0.4, 1.3, -0.7];
        let train: Vec<Sample> = (0..8)
            .map(|i| {
                let x = vec![-1.5 + 3.0 * i as f64 / 7.0];
                let y = predict(&pc, &teacher, &x).unwrap();
                Sample { x, y }
            })
            .collect();
        let res = fit(&pc, &train, Mode::Exact, &OptimizerConfig::default(), 5).unwrap();
        assert!(res.best().cost() < 1e-4);
        for x in [-1.2, 0.05, 0.9] {
            let err = predict(&pc, &res.best().theta, &[x]).unwrap() - predict(&pc, &teacher, &[x]).unwrap();
            assert!(err.abs() < 1e-2);
        }
    }
}
