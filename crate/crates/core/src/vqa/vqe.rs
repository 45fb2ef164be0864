//! Variational eigensolver on a hardware-efficient ansatz.

use serde::{Deserialize, Serialize};

use super::{hardware_efficient, multi_start, CostObjective, Estimator, Mode, MultiStart, OptimizerConfig};
use crate::measure::Observable;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    /// Lowest cost reached, an upper bound on the ground energy in exact mode.
    pub energy: f64,
    pub theta: Vec<f64>,
    /// Smallest eigenvalue of the observable.
    pub exact_ground: f64,
    pub runs: MultiStart,
}

impl VqeResult {
    pub fn error(&self) -> f64 {
        self.energy - self.exact_ground
    }
}

/// Minimizes `⟨ψ(θ)|M|ψ(θ)⟩` over a [`hardware_efficient`] ansatz with
/// `layers` entangling blocks.
pub fn vqe(
    observable: Observable,
    layers: usize,
    mode: Mode,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<VqeResult> {
    let exact_ground = observable.min_eigenvalue();
    let circuit = hardware_efficient(observable, layers)?;
    let mut objective = CostObjective::new(&circuit, Estimator::new(mode, seed.wrapping_add(1)));
    let mut rng = crate::seeded_rng(seed);
    let runs = multi_start(&mut objective, config, &mut rng)?;
    let best = runs.best();
    let energy = circuit.evaluate_cost(&best.theta, &[], &mut Estimator::Exact)?;
    Ok(VqeResult {
        energy,
        theta: best.theta.clone(),
        exact_ground,
        runs,
    })
}
