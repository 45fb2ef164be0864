use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qdesk::circuit::dft_matrix;
use qdesk::linalg::max_abs_diff;
use qdesk::qec::{run_trials, CodeInstance, CodeKind, ErrorModel};
use qdesk::qem::zne_run;
use qdesk::vqa::qaoa::{qaoa, qaoa_circuit, CostFunction, QaoaConfig};
use qdesk::vqa::qml::{encoding_model, fit, predict, Sample};
use qdesk::vqa::vqe::vqe;
use qdesk::vqa::{Estimator, MultiStart};
use qdesk::{qft, seeded_rng, Circuit, DensityMatrix, Observable, Readout, StateVector};
use serde_json::{json, Value};

use crate::config::{self, Dataset, Problem, QaoaFileConfig, QmlConfig, VqeConfig};
use crate::record::Table;

/// What a subcommand hands back for recording.
pub struct Outcome {
    pub config: Value,
    pub outputs: Value,
    pub table: Table,
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a circuit file; an `observable` line naming a file loads a JSON
/// matrix relative to the circuit.
pub fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = base_dir(path);
    let resolver = |token: &str| -> std::result::Result<Observable, String> {
        let matrix = config::read_matrix_file(&base.join(token)).map_err(|e| format!("{e:#}"))?;
        Observable::spectral(&matrix)
            .map(|o| o.named(token))
            .map_err(|e| e.to_string())
    };
    Circuit::parse_with(&text, &resolver).with_context(|| format!("in {}", path.display()))
}

fn history_table(runs: &MultiStart) -> Table {
    let mut table = Table::new(&["run", "iteration", "cost", "grad_norm"]);
    for (r, run) in runs.runs.iter().enumerate() {
        for (k, step) in run.history.iter().enumerate() {
            table.push(vec![r.to_string(), k.to_string(), step.cost.to_string(), step.grad_norm.to_string()]);
        }
    }
    table
}

pub struct RunArgs<'a> {
    pub circuit: &'a Path,
    pub shots: Option<usize>,
    pub readout: Readout,
    pub noise: Option<&'a Path>,
    pub seed: u64,
}

pub fn run(args: RunArgs<'_>) -> Result<Outcome> {
    let mut circuit = read_circuit(args.circuit)?;
    if let Some(path) = args.noise {
        circuit.noise = config::load_noise(path)?;
    }
    let noisy = !circuit.noise.is_noiseless();
    let obs = circuit.observable()?.into_owned();
    let psi0 = StateVector::zero(circuit.n_qubits())?;
    let rho0 = DensityMatrix::from_pure(&psi0)?;
    let (exact, probabilities) = if noisy {
        let rho = qdesk::noise::run_noisy(&circuit, &rho0)?;
        let probs: Vec<f64> = rho.matrix().diagonal().iter().map(|d| d.re).collect();
        (rho.expectation(&obs)?, probs)
    } else {
        let psi = circuit.run_statevector(&psi0)?;
        (obs.expectation(&psi)?, psi.probabilities())
    };
    let mut table = Table::new(&["outcome", "count"]);
    let shots = match args.shots {
        Some(t) => {
            let mut rng = seeded_rng(args.seed);
            let res = if noisy {
                circuit.run_and_measure_noisy(&rho0, t, args.readout, &mut rng)?
            } else {
                circuit.run_and_measure(&psi0, t, args.readout, &mut rng)?
            };
            for (k, n) in &res.counts {
                table.push(vec![k.clone(), n.to_string()]);
            }
            serde_json::to_value(&res)?
        }
        None => Value::Null,
    };
    Ok(Outcome {
        config: json!({
            "circuit_file": args.circuit.display().to_string(),
            "circuit": circuit.to_text(),
            "shots": args.shots,
            "readout": args.readout,
            "noise": circuit.noise,
        }),
        outputs: json!({
            "n_qubits": circuit.n_qubits(),
            "n_gates": circuit.len(),
            "observable": obs.name().unwrap_or("custom"),
            "noisy": noisy,
            "expectation": exact,
            "probabilities": probabilities,
            "shots": shots,
        }),
        table,
    })
}

pub fn vqe_cmd(path: &Path, seed: u64) -> Result<Outcome> {
    let loaded = config::load::<VqeConfig>(path)?;
    let cfg = loaded.config;
    let obs = cfg.observable.resolve(&loaded.base)?;
    let res = vqe(obs, cfg.layers, cfg.mode, &cfg.optimizer, seed)?;
    Ok(Outcome {
        table: history_table(&res.runs),
        config: serde_json::to_value(&cfg)?,
        outputs: json!({
            "energy": res.energy,
            "exact_ground": res.exact_ground,
            "error": res.error(),
            "theta": res.theta,
            "best_run": res.runs.best,
            "runs": res.runs.runs,
        }),
    })
}

pub fn qaoa_cmd(path: &Path, seed: u64) -> Result<Outcome> {
    let cfg = config::load::<QaoaFileConfig>(path)?.config;
    let cost = match &cfg.problem {
        Problem::MaxCut { n, edges } => CostFunction::max_cut(*n, edges)?,
        Problem::Table(values) => {
            let n = values.len().trailing_zeros() as usize;
            if values.len() != 1 << n {
                bail!("cost table length {} is not a power of two", values.len());
            }
            CostFunction::from_fn(n, |bits| {
                let idx = bits.iter().fold(0, |acc, &b| acc << 1 | b as usize);
                values[idx]
            })?
        }
    };
    let qcfg = QaoaConfig {
        p: cfg.p,
        samples: cfg.samples,
        mode: cfg.mode,
        optimizer: cfg.optimizer,
    };
    let res = qaoa(&cost, &qcfg, seed)?;
    let circuit = qaoa_circuit(&cost, cfg.p)?;
    let at_zero = circuit.evaluate_cost(&vec![0.0; circuit.n_params()], &[], &mut Estimator::Exact)?;
    let mean = cost.values().iter().sum::<f64>() / cost.values().len() as f64;
    Ok(Outcome {
        table: history_table(&res.runs),
        config: serde_json::to_value(&cfg)?,
        outputs: json!({
            "best_bitstring": res.best_bitstring,
            "best_q": res.best_value,
            "optimum_q": res.optimum,
            "optimum_found": res.best_value == res.optimum,
            "expectation": res.expectation,
            "expectation_at_zero": at_zero,
            "uniform_mean_q": mean,
            "theta": res.theta,
            "counts": res.counts,
            "best_run": res.runs.best,
            "runs": res.runs.runs,
        }),
    })
}

fn dataset(ds: &Dataset, base: &Path, circuit: &qdesk::vqa::ParameterizedCircuit) -> Result<Vec<Sample>> {
    match ds {
        Dataset::Samples(s) => Ok(s.clone()),
        Dataset::Csv(file) => config::read_csv_dataset(&base.join(file)),
        Dataset::Teacher { theta, inputs } => inputs
            .iter()
            .map(|x| Ok(Sample { x: x.clone(), y: predict(circuit, theta, x)? }))
            .collect(),
    }
}

pub fn qml_cmd(path: &Path, seed: u64) -> Result<Outcome> {
    let loaded = config::load::<QmlConfig>(path)?;
    let cfg = loaded.config;
    let obs = cfg.observable.resolve(&loaded.base)?;
    let circuit = encoding_model(obs, cfg.features, cfg.layers)?;
    let train = dataset(&cfg.train, &loaded.base, &circuit)?;
    let res = fit(&circuit, &train, cfg.mode, &cfg.optimizer, seed)?;
    let theta = &res.best().theta;
    let test = match &cfg.test {
        Some(ds) => {
            let samples = dataset(ds, &loaded.base, &circuit)?;
            let errors: Vec<f64> = samples
                .iter()
                .map(|s| Ok(predict(&circuit, theta, &s.x)? - s.y))
                .collect::<Result<_>>()?;
            let max = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            json!({ "samples": samples.len(), "errors": errors, "max_abs_error": max })
        }
        None => Value::Null,
    };
    Ok(Outcome {
        table: history_table(&res),
        config: serde_json::to_value(&cfg)?,
        outputs: json!({
            "final_loss": res.best().cost(),
            "theta": theta,
            "n_params": circuit.n_params(),
            "train_samples": train.len(),
            "test": test,
            "best_run": res.best,
            "runs": res.runs,
        }),
    })
}

pub const DEFAULT_ERROR_MODELS: [&str; 6] = ["none", "x", "y", "z", "rx-half", "random-unitary"];

pub fn qec_cmd(codes: &[CodeKind], models: &[ErrorModel], trials: usize, seed: u64) -> Result<Outcome> {
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::new();
    let mut table = Table::new(&["code", "error_model", "trials", "successes", "success_rate", "mean_fidelity", "min_fidelity"]);
    for &kind in codes {
        let code = CodeInstance::new(kind);
        for &model in models {
            let s = run_trials(&code, model, trials, &mut rng)?;
            table.push(vec![
                s.code.to_string(),
                s.error_model.clone(),
                s.trials.to_string(),
                s.successes.to_string(),
                s.success_rate.to_string(),
                s.mean_fidelity.to_string(),
                s.min_fidelity.to_string(),
            ]);
            rows.push(s);
        }
    }
    Ok(Outcome {
        config: json!({
            "codes": codes,
            "error_models": models.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "trials": trials,
        }),
        outputs: json!({ "summaries": rows }),
        table,
    })
}

pub fn zne_cmd(circuit_path: &Path, config_path: Option<&Path>, noise: Option<&Path>, seed: u64) -> Result<Outcome> {
    let mut circuit = read_circuit(circuit_path)?;
    if let Some(path) = noise {
        circuit.noise = config::load_noise(path)?;
    }
    let cfg = config::load_zne(config_path)?;
    let rho0 = DensityMatrix::from_pure(&StateVector::zero(circuit.n_qubits())?)?;
    let report = zne_run(&circuit, &rho0, &cfg, &mut seeded_rng(seed))?;
    let mut table = Table::new(&["lambda", "value", "stderr"]);
    for p in &report.points {
        table.push(vec![p.lambda.to_string(), p.value.to_string(), p.stderr.to_string()]);
    }
    Ok(Outcome {
        config: json!({
            "circuit_file": circuit_path.display().to_string(),
            "circuit": circuit.to_text(),
            "noise": circuit.noise,
            "zne": cfg,
        }),
        outputs: serde_json::to_value(&report)?,
        table,
    })
}

pub fn qft_check(max_qubits: usize, tol: f64) -> Result<Outcome> {
    if max_qubits == 0 || max_qubits > 10 {
        bail!(qdesk::Error::InvalidArgument(format!(
            "max qubits must be in 1..=10, got {max_qubits}"
        )));
    }
    let mut rows = Vec::new();
    let mut table = Table::new(&["n_qubits", "gates", "max_deviation", "pass"]);
    for n in 1..=max_qubits {
        let circuit = qft(n)?;
        let deviation = max_abs_diff(circuit.unitary_of()?.matrix(), &dft_matrix(n));
        let gates: Vec<String> = circuit
            .ops()
            .iter()
            .map(|op| format!("{} {:?}", op.gate.label(), op.targets))
            .collect();
        table.push(vec![n.to_string(), gates.len().to_string(), deviation.to_string(), (deviation <= tol).to_string()]);
        rows.push(json!({ "n_qubits": n, "max_deviation": deviation, "pass": deviation <= tol, "gates": gates }));
    }
    Ok(Outcome {
        config: json!({ "max_qubits": max_qubits, "tolerance": tol }),
        outputs: json!({ "checks": rows }),
        table,
    })
}
