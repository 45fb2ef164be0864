//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qdesk::linalg::{c, Matrix};
use qdesk::noise::NoiseModel;
use qdesk::qem::ZneConfig;
use qdesk::vqa::qml::Sample;
use qdesk::vqa::{Mode, OptimizerConfig};
use qdesk::Observable;
use serde::{Deserialize, Serialize};

/// A matrix entry: a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// Parses a square matrix given as JSON rows.
pub fn matrix_from_rows(rows: &[Vec<Entry>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 {
        bail!("matrix has no rows");
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        bail!("matrix row {i} has {} entries, expected {n}", row.len());
    }
    Ok(Matrix::from_fn(n, n, |i, j| match rows[i][j] {
        Entry::Real(re) => c(re, 0.0),
        Entry::Complex([re, im]) => c(re, im),
    }))
}

pub fn read_matrix_file(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<Entry>> =
        serde_json::from_str(&text).with_context(|| format!("parsing matrix {}", path.display()))?;
    matrix_from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub pauli: String,
    pub coeff: f64,
}

/// An observable in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    /// A single Pauli string such as `"ZIX"`.
    Pauli(String),
    /// `Σ coeff · P`.
    Terms(Vec<PauliTerm>),
    Matrix(Vec<Vec<Entry>>),
    /// Path to a JSON matrix, relative to the config file.
    MatrixFile(String),
    Diagonal(Vec<f64>),
}

impl ObservableSpec {
    pub fn resolve(&self, base: &Path) -> Result<Observable> {
        Ok(match self {
            ObservableSpec::Pauli(s) => Observable::pauli_string(s)?,
            ObservableSpec::Terms(terms) => {
                let Some(first) = terms.first() else {
                    bail!("observable has no terms");
                };
                let mut m = Observable::pauli_string(&first.pauli)?.matrix().scale(first.coeff);
                for t in &terms[1..] {
                    let p = Observable::pauli_string(&t.pauli)?.matrix();
                    if p.shape() != m.shape() {
                        bail!("Pauli term `{}` has the wrong length", t.pauli);
                    }
                    m += p.scale(t.coeff);
                }
                Observable::spectral(&m)?
            }
            ObservableSpec::Matrix(rows) => Observable::spectral(&matrix_from_rows(rows)?)?,
            ObservableSpec::MatrixFile(file) => Observable::spectral(&read_matrix_file(&base.join(file))?)?,
            ObservableSpec::Diagonal(values) => Observable::diagonal(values)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeConfig {
    pub observable: ObservableSpec,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_layers() -> usize {
    2
}

fn default_samples() -> usize {
    1024
}

fn default_p() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Max-cut on a graph with `n` vertices.
    MaxCut { n: usize, edges: Vec<(usize, usize)> },
    /// Explicit table of `Q(x)` for all `2^n` bitstrings.
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaFileConfig {
    pub problem: Problem,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Samples(Vec<Sample>),
    /// CSV with columns `x_0, …, x_{D-1}, y` and a header row.
    Csv(String),
    /// Labels produced by the model itself at `theta`.
    Teacher { theta: Vec<f64>, inputs: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmlConfig {
    pub observable: ObservableSpec,
    pub features: usize,
    #[serde(default = "default_qml_layers")]
    pub layers: usize,
    pub train: Dataset,
    #[serde(default)]
    pub test: Option<Dataset>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_qml_layers() -> usize {
    1
}

pub fn read_csv_dataset(path: &Path) -> Result<Vec<Sample>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let Some((&y, x)) = values.split_last() else {
            bail!("{}: row {} is empty", path.display(), i + 1);
        };
        samples.push(Sample { x: x.to_vec(), y });
    }
    Ok(samples)
}

/// A JSON config file together with the directory relative paths resolve against.
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Loaded<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Loaded {
        config,
        base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn load_noise(path: &Path) -> Result<NoiseModel> {
    let model: NoiseModel = load(path)?.config;
    for spec in &model.channels {
        qdesk::NoiseSpec::new(spec.kind, spec.p)?;
    }
    if !model.cce_epsilon.is_finite() {
        bail!("cce_epsilon must be finite");
    }
    Ok(model)
}

pub fn load_zne(path: Option<&Path>) -> Result<ZneConfig> {
    let config = match path {
        Some(p) => load::<ZneConfig>(p)?.config,
        None => ZneConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_real_and_complex_rows() {
        let rows: Vec<Vec<Entry>> = serde_json::from_str("[[1, [0, -1]], [[0, 1], -1]]").unwrap();
        let m = matrix_from_rows(&rows).unwrap();
        assert_eq!(m[(0, 1)], c(0.0, -1.0));
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));
        let ragged: Vec<Vec<Entry>> = serde_json::from_str("[[1, 0], [0]]").unwrap();
        assert!(matrix_from_rows(&ragged).is_err());
    }

    #[test]
    fn pauli_sums() {
        let spec: ObservableSpec =
            serde_json::from_str(r#"{"terms": [{"pauli": "ZZ", "coeff": 1.0}, {"pauli": "XI", "coeff": 0.5}]}"#)
                .unwrap();
        let obs = spec.resolve(Path::new(".")).unwrap();
        assert_eq!(obs.n_qubits(), 2);
        let bad: ObservableSpec =
            serde_json::from_str(r#"{"terms": [{"pauli": "ZZ", "coeff": 1.0}, {"pauli": "X", "coeff": 0.5}]}"#)
                .unwrap();
        assert!(bad.resolve(Path::new(".")).is_err());
    }

    #[test]
    fn vqe_defaults() {
        let cfg: VqeConfig = serde_json::from_str(r#"{"observable": {"pauli": "ZZ"}}"#).unwrap();
        assert_eq!(cfg.layers, 2);
        assert_eq!(cfg.mode, Mode::Exact);
        assert_eq!(cfg.optimizer.restarts, 5);
        assert!(serde_json::from_str::<VqeConfig>(r#"{"observable": {"pauli": "Z"}, "bogus": 1}"#).is_err());
    }
}
