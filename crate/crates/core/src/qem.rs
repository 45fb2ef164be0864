//! Zero-noise extrapolation.
//!
//! A noisy expectation `f(λ)` is evaluated at amplified noise levels
//! `λ ≥ 1`, a model is fitted by least squares and evaluated at `λ = 0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::density::DensityMatrix;
use crate::measure::Estimate;
use crate::noise::run_with_model;
use crate::{Error, Result};

/// Highest polynomial degree accepted by [`FitModel::Polynomial`].
pub const MAX_POLY_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "model")]
pub enum FitModel {
    #[default]
    Linear,
    Polynomial { degree: usize },
    /// `f(λ) = a e^{-bλ}`.
    Exponential,
}

impl FitModel {
    pub fn n_params(self) -> usize {
        match self {
            FitModel::Linear | FitModel::Exponential => 2,
            FitModel::Polynomial { degree } => degree + 1,
        }
    }
}

/// How the noise is amplified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMethod {
    /// Scale every error probability and over-rotation by `λ`.
    #[default]
    Probability,
    /// Replace each gate `U` by `U (U†U)^k`; `λ = 2k + 1` must be an odd integer.
    Folding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZneConfig {
    pub scale_factors: Vec<f64>,
    pub fit_model: FitModel,
    /// Shots per noise level; `None` evaluates exactly.
    pub samples_per_point: Option<usize>,
    pub scale_method: ScaleMethod,
}

impl Default for ZneConfig {
    fn default() -> Self {
        Self {
            scale_factors: vec![1.0, 1.5, 2.0, 2.5],
            fit_model: FitModel::Linear,
            samples_per_point: None,
            scale_method: ScaleMethod::Probability,
        }
    }
}

impl ZneConfig {
    pub fn validate(&self) -> Result<()> {
        if let FitModel::Polynomial { degree } = self.fit_model {
            if degree == 0 || degree > MAX_POLY_DEGREE {
                return Err(Error::InvalidArgument(format!(
                    "polynomial degree must be in 1..={MAX_POLY_DEGREE}, got {degree}"
                )));
            }
        }
        if let Some(bad) = self.scale_factors.iter().find(|l| !(l.is_finite() && **l >= 1.0)) {
            return Err(Error::InvalidArgument(format!("scale factor {bad} is below 1")));
        }
        if self.scale_factors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "scale factors must be strictly increasing".into(),
            ));
        }
        if self.scale_factors.len() < self.fit_model.n_params() {
            return Err(Error::RankDeficient(format!(
                "{} scale factors cannot determine {} parameters",
                self.scale_factors.len(),
                self.fit_model.n_params()
            )));
        }
        if self.samples_per_point == Some(0) {
            return Err(Error::InvalidArgument("samples per point must be at least 1".into()));
        }
        if self.scale_method == ScaleMethod::Folding {
            if let Some(bad) = self.scale_factors.iter().find(|l| fold_factor(**l).is_none()) {
                return Err(Error::InvalidArgument(format!(
                    "folding needs odd integer scale factors, got {bad}"
                )));
            }
        }
        Ok(())
    }
}

fn fold_factor(lambda: f64) -> Option<usize> {
    let k = lambda.round();
    (lambda == k && k >= 1.0 && k % 2.0 == 1.0).then_some(k as usize)
}

/// `f(λ)` for `circuit` started in `rho0`, measured on the circuit observable.
///
/// `shots = None` gives the exact value with zero standard error. Clamped
/// probabilities are reported in the returned warnings.
pub fn noisy_expectation<R: Rng + ?Sized>(
    circuit: &Circuit,
    rho0: &DensityMatrix,
    lambda: f64,
    method: ScaleMethod,
    shots: Option<usize>,
    rng: &mut R,
) -> Result<(Estimate, Vec<String>)> {
    let (rho, warnings) = match method {
        ScaleMethod::Probability => {
            let scaled = circuit.noise.scaled(lambda)?;
            (run_with_model(circuit, rho0, &scaled.model)?, scaled.warnings)
        }
        ScaleMethod::Folding => {
            let k = fold_factor(lambda).ok_or_else(|| {
                Error::InvalidArgument(format!("folding needs an odd integer scale, got {lambda}"))
            })?;
            (run_with_model(&circuit.fold(k)?, rho0, &circuit.noise)?, Vec::new())
        }
    };
    let obs = circuit.observable()?;
    let estimate = match shots {
        None => Estimate {
            estimate: rho.expectation(&obs)?,
            stderr: 0.0,
            shots: 0,
        },
        Some(t) => rho.estimate_expectation(&obs, t, rng)?,
    };
    Ok((estimate, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub model: FitModel,
    /// Model value at `λ = 0`.
    pub f0: f64,
    /// Linear and polynomial: coefficients `c_0, c_1, …`. Exponential: `[a, b]`.
    pub params: Vec<f64>,
    /// `f(λ_i) - model(λ_i)`.
    pub residuals: Vec<f64>,
    /// Standard error of `f0` propagated from the per-point errors.
    pub stderr: f64,
}

fn check_points(points: &[(f64, f64)], model: FitModel) -> Result<()> {
    if let FitModel::Polynomial { degree } = model {
        if degree == 0 || degree > MAX_POLY_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree must be in 1..={MAX_POLY_DEGREE}, got {degree}"
            )));
        }
    }
    if let Some((l, f)) = points.iter().find(|(l, f)| !l.is_finite() || !f.is_finite()) {
        return Err(Error::NonFinite(format!("point ({l}, {f})")));
    }
    let mut lambdas: Vec<f64> = points.iter().map(|p| p.0).collect();
    lambdas.sort_by(f64::total_cmp);
    if lambdas.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::RankDeficient("duplicate noise scale".into()));
    }
    if points.len() < model.n_params() {
        return Err(Error::RankDeficient(format!(
            "{} points cannot determine {} parameters",
            points.len(),
            model.n_params()
        )));
    }
    Ok(())
}

/// Solves the least-squares problem `A c ≈ y` and returns `c` together with
/// the first row of the pseudo-inverse `(AᵀA)⁻¹Aᵀ`.
fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::RankDeficient(format!(
            "design matrix condition {smax}/{smin}"
        )));
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let coeffs = &pinv * y;
    Ok((coeffs, pinv.row(0).iter().copied().collect()))
}

fn propagate(weights: &[f64], sigmas: &[f64]) -> f64 {
    weights
        .iter()
        .zip(sigmas)
        .map(|(w, s)| (w * s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares fit of `points = [(λ_i, f_i)]` and extrapolation to `λ = 0`.
///
/// `sigmas`, if given, are the standard errors of the `f_i` and are used
/// only to propagate an error bar onto `f0`; the fit itself is unweighted.
pub fn zne_extrapolate(points: &[(f64, f64)], model: FitModel, sigmas: Option<&[f64]>) -> Result<Fit> {
    check_points(points, model)?;
    let zeros = vec![0.0; points.len()];
    let sigmas = match sigmas {
        Some(s) if s.len() != points.len() => {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: s.len(),
            })
        }
        Some(s) => s,
        None => &zeros,
    };
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    match model {
        FitModel::Linear | FitModel::Polynomial { .. } => {
            let k = model.n_params();
            let a = DMatrix::from_fn(points.len(), k, |i, j| points[i].0.powi(j as i32));
            let (c, w) = least_squares(&a, &y)?;
            let residuals = (&y - &a * &c).iter().copied().collect();
            Ok(Fit {
                model,
                f0: c[0],
                params: c.iter().copied().collect(),
                residuals,
                stderr: propagate(&w, sigmas),
            })
        }
        FitModel::Exponential => exponential_fit(points, &y, sigmas),
    }
}

fn exponential_fit(points: &[(f64, f64)], y: &DVector<f64>, sigmas: &[f64]) -> Result<Fit> {
    let m = points.len();
    let model = |a: f64, b: f64, l: f64| a * (-b * l).exp();
    // Start from a log-linear fit when all values share a sign.
    let sign = y[0].signum();
    let (mut a, mut b) = if y.iter().all(|v| v.signum() == sign && *v != 0.0) {
        let design = DMatrix::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { -points[i].0 });
        let logs = y.map(|v| (v * sign).ln());
        let (c, _) = least_squares(&design, &logs)?;
        (sign * c[0].exp(), c[1])
    } else {
        (y[0], 0.0)
    };
    let sse = |a: f64, b: f64| -> f64 {
        points.iter().map(|&(l, f)| (f - model(a, b, l)).powi(2)).sum()
    };
    let jacobian = |a: f64, b: f64| {
        DMatrix::from_fn(m, 2, |i, j| {
            let l = points[i].0;
            let e = (-b * l).exp();
            if j == 0 {
                e
            } else {
                -a * l * e
            }
        })
    };
    let mut mu = 1e-3;
    let mut current = sse(a, b);
    for _ in 0..200 {
        let jac = jacobian(a, b);
        let r = DVector::from_iterator(m, points.iter().map(|&(l, f)| f - model(a, b, l)));
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for d in 0..2 {
                damped[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let (na, nb) = (a + step[0], b + step[1]);
            let trial = sse(na, nb);
            if trial.is_finite() && trial <= current {
                let done = (current - trial) <= 1e-30 + 1e-15 * current;
                a = na;
                b = nb;
                current = trial;
                mu = (mu / 10.0).max(1e-15);
                improved = !done;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite(format!("exponential fit a={a}, b={b}")));
    }
    let (_, w) = least_squares(&jacobian(a, b), y)?;
    let residuals = points.iter().map(|&(l, f)| f - model(a, b, l)).collect();
    Ok(Fit {
        model: FitModel::Exponential,
        f0: a,
        params: vec![a, b],
        residuals,
        stderr: propagate(&w, sigmas),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZnePoint {
    pub lambda: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneReport {
    /// Unamplified noisy value `f(1)`.
    pub raw: f64,
    pub raw_stderr: f64,
    pub mitigated: f64,
    pub mitigated_stderr: f64,
    /// Exact noiseless value, for reference.
    pub ideal: f64,
    pub points: Vec<ZnePoint>,
    pub fit: Fit,
    pub warnings: Vec<String>,
}

/// Evaluates `f(λ)` at every configured scale, fits and extrapolates.
pub fn zne_run<R: Rng + ?Sized>(
    circuit: &Circuit,
    rho0: &DensityMatrix,
    config: &ZneConfig,
    rng: &mut R,
) -> Result<ZneReport> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut points = Vec::with_capacity(config.scale_factors.len());
    for &lambda in &config.scale_factors {
        let (est, w) = noisy_expectation(
            circuit,
            rho0,
            lambda,
            config.scale_method,
            config.samples_per_point,
            rng,
        )?;
        warnings.extend(w);
        points.push(ZnePoint {
            lambda,
            value: est.estimate,
            stderr: est.stderr,
        });
    }
    let (raw, raw_stderr) = match points.iter().find(|p| p.lambda == 1.0) {
        Some(p) => (p.value, p.stderr),
        None => {
            let (est, _) = noisy_expectation(
                circuit,
                rho0,
                1.0,
                ScaleMethod::Probability,
                config.samples_per_point,
                rng,
            )?;
            (est.estimate, est.stderr)
        }
    };
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.lambda, p.value)).collect();
    let sigmas: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let fit = zne_extrapolate(&xy, config.fit_model, Some(&sigmas))?;
    let ideal = run_with_model(circuit, rho0, &Default::default())?.expectation(&*circuit.observable()?)?;
    Ok(ZneReport {
        raw,
        raw_stderr,
        mitigated: fit.f0,
        mitigated_stderr: fit.stderr,
        ideal,
        points,
        fit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ChannelKind, NoiseModel, NoiseSpec, Placement};
    use crate::seeded_rng;

    #[test]
    fn exact_linear_data() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0].iter().map(|&l| (l, 1.0 - 0.1 * l)).collect();
        let fit = zne_extrapolate(&pts, FitModel::Linear, None).unwrap();
        assert!((fit.f0 - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn polynomial_recovers_a_cubic() {
        let f = |l: f64| 0.3 - 0.2 * l + 0.05 * l * l - 0.01 * l * l * l;
        let pts: Vec<(f64, f64)> = [1.0, 1.5, 2.0, 2.5, 3.0].iter().map(|&l| (l, f(l))).collect();
        let fit = zne_extrapolate(&pts, FitModel::Polynomial { degree: 3 }, None).unwrap();
        assert!((fit.f0 - 0.3).abs() < 1e-9);
        assert!(zne_extrapolate(&pts, FitModel::Polynomial { degree: 4 }, None).is_err());
    }

    #[test]
    fn exponential_recovers_amplitude() {
        for (a, b) in [(0.8f64, 0.3f64), (-1.2, 0.05), (2.0, -0.1)] {
            let pts: Vec<(f64, f64)> = [1.0, 1.5, 2.0, 2.5].iter().map(|&l| (l, a * (-b * l).exp())).collect();
            let fit = zne_extrapolate(&pts, FitModel::Exponential, None).unwrap();
            assert!((fit.f0 - a).abs() < 1e-6, "{} vs {a}", fit.f0);
        }
    }

    #[test]
    fn exponential_survives_model_mismatch() {
        let pts = [(1.0, 0.5), (1.5, -0.1), (2.0, 0.3), (2.5, -0.2)];
        let fit = zne_extrapolate(&pts, FitModel::Exponential, None).unwrap();
        assert!(fit.f0.is_finite());
        assert!(fit.residuals.iter().any(|r| r.abs() > 1e-3));
    }

    #[test]
    fn duplicate_scales_are_rank_deficient() {
        let pts = [(1.0, 0.9), (1.0, 0.8), (2.0, 0.7)];
        assert!(matches!(
            zne_extrapolate(&pts, FitModel::Linear, None),
            Err(Error::RankDeficient(_))
        ));
        assert!(matches!(
            zne_extrapolate(&pts[..1], FitModel::Linear, None),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn propagated_error_of_a_two_point_line() {
        // f0 = 2 f(1) - f(2), so σ0² = 4σ1² + σ2².
        let fit = zne_extrapolate(&[(1.0, 0.5), (2.0, 0.4)], FitModel::Linear, Some(&[0.1, 0.2])).unwrap();
        assert!((fit.f0 - 0.6).abs() < 1e-12);
        assert!((fit.stderr - (0.04f64 + 0.04).sqrt()).abs() < 1e-12);
    }

    fn depolarized_z(p: f64) -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        c.noise = NoiseModel::noiseless()
            .with_channel(NoiseSpec::new(ChannelKind::Depolarizing, p).unwrap().at(Placement::End));
        c
    }

    #[test]
    fn depolarizing_is_linear_in_scale() {
        let c = depolarized_z(0.1);
        let rho0 = DensityMatrix::from_pure(&crate::StateVector::zero(1).unwrap()).unwrap();
        let mut rng = seeded_rng(0);
        for lambda in [1.0, 2.0, 3.5] {
            let (e, w) = noisy_expectation(&c, &rho0, lambda, ScaleMethod::Probability, None, &mut rng).unwrap();
            assert!(w.is_empty());
            assert!((e.estimate - (1.0 - 0.1 * lambda)).abs() < 1e-12);
        }
        let report = zne_run(&c, &rho0, &ZneConfig::default(), &mut rng).unwrap();
        assert!((report.mitigated - report.ideal).abs() < 1e-9);
        assert!((report.mitigated - 1.0).abs() < 1e-9);
        assert!((report.raw - report.ideal).abs() > 1e-3);
    }

    #[test]
    fn clamping_is_reported() {
        let c = depolarized_z(0.6);
        let rho0 = DensityMatrix::from_pure(&crate::StateVector::zero(1).unwrap()).unwrap();
        let (_, w) = noisy_expectation(&c, &rho0, 2.5, ScaleMethod::Probability, None, &mut seeded_rng(0)).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn noiseless_circuit_is_unchanged() {
        let mut c = Circuit::new(2).unwrap();
        c.h(0).unwrap().cnot(0, 1).unwrap();
        let rho0 = DensityMatrix::from_pure(&crate::StateVector::zero(2).unwrap()).unwrap();
        let report = zne_run(&c, &rho0, &ZneConfig::default(), &mut seeded_rng(1)).unwrap();
        assert!((report.raw - report.ideal).abs() < 1e-12);
        assert!((report.mitigated - report.ideal).abs() < 1e-12);
    }

    #[test]
    fn folding_amplifies_gate_noise() {
        let mut c = Circuit::new(1).unwrap();
        c.h(0).unwrap();
        c.push_label(&"RY(0.3)".parse().unwrap(), &[0]).unwrap();
        c.noise = NoiseModel::noiseless().with_channel(NoiseSpec::new(ChannelKind::Depolarizing, 0.02).unwrap());
        let rho0 = DensityMatrix::from_pure(&crate::StateVector::zero(1).unwrap()).unwrap();
        let config = ZneConfig {
            scale_factors: vec![1.0, 3.0, 5.0],
            scale_method: ScaleMethod::Folding,
            ..ZneConfig::default()
        };
        let report = zne_run(&c, &rho0, &config, &mut seeded_rng(1)).unwrap();
        assert!((report.mitigated - report.ideal).abs() < (report.raw - report.ideal).abs());
        let bad = ZneConfig {
            scale_factors: vec![1.0, 1.5],
            scale_method: ScaleMethod::Folding,
            ..ZneConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
