use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What an optimizer may ask of a cost function: values and gradients at
/// chosen parameters, nothing about how they are computed.
pub trait Objective {
    fn dimension(&self) -> usize;
    fn cost(&mut self, theta: &[f64]) -> Result<f64>;
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>>;
    /// Noise-free costs allow step-size backtracking.
    fn is_exact(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Initial step size `γ`.
    pub gamma: f64,
    /// Stop once `‖∇f‖ < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Independent starts used by [`multi_start`].
    pub restarts: usize,
    /// Halve `γ` whenever an exact-mode step would increase the cost.
    pub backtracking: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            tol: 1e-6,
            max_iters: 1000,
            restarts: 5,
            backtracking: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
}

/// Trajectory of `θ_{k+1} = θ_k - γ ∇f(θ_k)`; `history[k]` holds `θ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub iteration: usize,
    pub converged: bool,
    pub history: Vec<Step>,
}

impl OptimizerState {
    pub fn cost(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |s| s.cost)
    }

    pub fn costs(&self) -> Vec<f64> {
        self.history.iter().map(|s| s.cost).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} {value}")))
    }
}

/// Plain gradient descent with optional backtracking.
///
/// Runs until `‖∇f‖ < tol` or `max_iters` steps. With backtracking on and
/// an exact objective, a step that would raise the cost is retried with
/// half the step size; the reduced `γ` is kept for later steps. Once `γ`
/// falls below `1e-12` the run stops unconverged.
pub fn gradient_descent<O: Objective + ?Sized>(
    objective: &mut O,
    theta0: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizerState> {
    if !(config.gamma > 0.0 && config.gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {}",
            config.gamma
        )));
    }
    if theta0.len() != objective.dimension() {
        return Err(Error::DimensionMismatch {
            expected: objective.dimension(),
            found: theta0.len(),
        });
    }
    let backtrack = config.backtracking && objective.is_exact();
    let mut theta = theta0.to_vec();
    let mut cost = finite(objective.cost(&theta)?, "cost")?;
    let mut grad = objective.gradient(&theta)?;
    let mut gamma = config.gamma;
    let mut history = vec![Step {
        theta: theta.clone(),
        cost,
        grad_norm: norm(&grad),
    }];
    let mut converged = norm(&grad) < config.tol;
    while !converged && history.len() <= config.max_iters {
        let (next, next_cost) = loop {
            let candidate: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - gamma * g).collect();
            let c = finite(objective.cost(&candidate)?, "cost")?;
            if backtrack && c > cost && gamma >= 1e-12 {
                gamma /= 2.0;
                continue;
            }
            break (candidate, c);
        };
        if backtrack && next_cost > cost {
            break;
        }
        theta = next;
        cost = next_cost;
        grad = objective.gradient(&theta)?;
        let grad_norm = finite(norm(&grad), "gradient norm")?;
        history.push(Step {
            theta: theta.clone(),
            cost,
            grad_norm,
        });
        converged = grad_norm < config.tol;
    }
    Ok(OptimizerState {
        theta,
        gamma,
        iteration: history.len() - 1,
        converged,
        history,
    })
}

/// Runs from several random starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    /// Index into `runs` of the lowest final cost.
    pub best: usize,
    pub runs: Vec<OptimizerState>,
}

impl MultiStart {
    pub fn best(&self) -> &OptimizerState {
        &self.runs[self.best]
    }
}

/// `config.restarts` runs of [`gradient_descent`] from `θ₀` drawn
/// uniformly from `[0, 2π)^N`.
pub fn multi_start<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &mut O,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<MultiStart> {
    let starts = config.restarts.max(1);
    let mut runs = Vec::with_capacity(starts);
    for _ in 0..starts {
        let theta0: Vec<f64> = (0..objective.dimension())
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        runs.push(gradient_descent(objective, &theta0, config)?);
    }
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost().total_cmp(&b.1.cost()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(MultiStart { best, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f(θ) = cos θ`, known only through values and derivatives.
    struct Cosine {
        evaluations: usize,
    }

    impl Objective for Cosine {
        fn dimension(&self) -> usize {
            1
        }
        fn cost(&mut self, theta: &[f64]) -> Result<f64> {
            self.evaluations += 1;
            Ok(theta[0].cos())
        }
        fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-theta[0].sin()])
        }
    }

    struct Quadratic;

    impl Objective for Quadratic {
        fn dimension(&self) -> usize {
            2
        }
        fn cost(&mut self, t: &[f64]) -> Result<f64> {
            Ok(t[0] * t[0] + 10.0 * t[1] * t[1])
        }
        fn gradient(&mut self, t: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![2.0 * t[0], 20.0 * t[1]])
        }
    }

    #[test]
    fn descends_to_the_cosine_minimum() {
        let mut obj = Cosine { evaluations: 0 };
        let state = gradient_descent(&mut obj, &[0.1], &OptimizerConfig::default()).unwrap();
        assert!(state.converged);
        assert!(state.iteration <= 500);
        assert!((state.theta[0] - std::f64::consts::PI).abs() < 1e-3);
        assert!((state.cost() + 1.0).abs() < 1e-6);
        assert_eq!(state.history.len(), state.iteration + 1);
        for w in state.history.windows(2) {
            assert!(w[1].cost <= w[0].cost);
        }
    }

    #[test]
    fn stops_immediately_at_a_minimum() {
        let mut obj = Cosine { evaluations: 0 };
        let state =
            gradient_descent(&mut obj, &[std::f64::consts::PI], &OptimizerConfig::default()).unwrap();
        assert_eq!(state.history.len(), 1);
        assert!(state.converged);
    }

    #[test]
    fn backtracking_tames_large_steps() {
        let config = OptimizerConfig {
            gamma: 1.0,
            ..OptimizerConfig::default()
        };
        let state = gradient_descent(&mut Quadratic, &[1.0, 1.0], &config).unwrap();
        assert!(state.gamma < 0.1);
        assert!(state.cost() < 1e-10);
        for w in state.history.windows(2) {
            assert!(w[1].cost <= w[0].cost);
        }
        let loose = OptimizerConfig {
            gamma: 0.2,
            backtracking: false,
            max_iters: 5,
            ..OptimizerConfig::default()
        };
        let diverging = gradient_descent(&mut Quadratic, &[1.0, 1.0], &loose).unwrap();
        assert!(diverging.cost() > 1.0);
        assert_eq!(diverging.history.len(), 6);
    }

    #[test]
    fn rejects_bad_input() {
        let mut obj = Cosine { evaluations: 0 };
        let bad = OptimizerConfig {
            gamma: 0.0,
            ..OptimizerConfig::default()
        };
        assert!(gradient_descent(&mut obj, &[0.1], &bad).is_err());
        assert!(gradient_descent(&mut obj, &[0.1, 0.2], &OptimizerConfig::default()).is_err());
        assert!(matches!(
            gradient_descent(&mut obj, &[f64::NAN], &OptimizerConfig::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn multi_start_keeps_the_best_run() {
        let mut obj = Cosine { evaluations: 0 };
        let mut rng = crate::seeded_rng(4);
        let res = multi_start(&mut obj, &OptimizerConfig::default(), &mut rng).unwrap();
        assert_eq!(res.runs.len(), 5);
        assert!((res.best().cost() + 1.0).abs() < 1e-9);
    }
}
