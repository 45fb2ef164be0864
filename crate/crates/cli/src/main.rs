//! `qdesk` command-line front end.

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use qdesk::qec::{CodeKind, ErrorModel};
use qdesk::Readout;

use commands::Outcome;
use record::{RunRecord, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "qdesk", version, about = "Desk-scale quantum circuit simulator and variational toolkit")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, env = "QDESK_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Write the JSON run record here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also export the tabular part of the outputs as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReadoutArg {
    Observable,
    Bitstring,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a circuit file.
    Run {
        circuit: PathBuf,
        /// Sample this many shots; omit for exact results only.
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long, value_enum, default_value = "observable")]
        readout: ReadoutArg,
        /// JSON noise model replacing any noise lines in the circuit.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Variational eigensolver from a JSON config.
    Vqe { config: PathBuf },
    /// QAOA from a JSON config.
    Qaoa { config: PathBuf },
    /// Train a data-encoding model from a JSON config.
    Qml { config: PathBuf },
    /// Encode, corrupt, correct and tabulate success rates.
    Qec {
        /// bitflip3, phaseflip3 or shor9; repeatable. Defaults to all.
        #[arg(long = "code")]
        codes: Vec<String>,
        /// none, x, y, z, rx-half, random-unitary or bitflip-channel:P; repeatable.
        #[arg(long = "error-model")]
        error_models: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Zero-noise extrapolation of a noisy circuit.
    Zne {
        circuit: PathBuf,
        /// JSON extrapolation settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Compare the QFT circuit with the dense DFT matrix.
    QftCheck {
        #[arg(long, default_value_t = 4)]
        max_qubits: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run { .. } => "run",
            Command::Vqe { .. } => "vqe",
            Command::Qaoa { .. } => "qaoa",
            Command::Qml { .. } => "qml",
            Command::Qec { .. } => "qec",
            Command::Zne { .. } => "zne",
            Command::QftCheck { .. } => "qft-check",
        }
    }
}

fn dispatch(command: &Command, seed: u64) -> Result<Outcome> {
    match command {
        Command::Run {
            circuit,
            shots,
            readout,
            noise,
        } => commands::run(commands::RunArgs {
            circuit,
            shots: *shots,
            readout: match readout {
                ReadoutArg::Observable => Readout::Observable,
                ReadoutArg::Bitstring => Readout::Bitstring,
            },
            noise: noise.as_deref(),
            seed,
        }),
        Command::Vqe { config } => commands::vqe_cmd(config, seed),
        Command::Qaoa { config } => commands::qaoa_cmd(config, seed),
        Command::Qml { config } => commands::qml_cmd(config, seed),
        Command::Qec {
            codes,
            error_models,
            trials,
        } => {
            let codes: Vec<CodeKind> = if codes.is_empty() {
                vec![CodeKind::BitFlip3, CodeKind::PhaseFlip3, CodeKind::Shor9]
            } else {
                codes.iter().map(|c| c.parse()).collect::<qdesk::Result<_>>()?
            };
            let models: Vec<ErrorModel> = if error_models.is_empty() {
                commands::DEFAULT_ERROR_MODELS.iter().map(|m| m.parse()).collect::<qdesk::Result<_>>()?
            } else {
                error_models.iter().map(|m| m.parse()).collect::<qdesk::Result<_>>()?
            };
            commands::qec_cmd(&codes, &models, *trials, seed)
        }
        Command::Zne { circuit, config, noise } => {
            commands::zne_cmd(circuit, config.as_deref(), noise.as_deref(), seed)
        }
        Command::QftCheck { max_qubits, tol } => commands::qft_check(*max_qubits, *tol),
    }
}

/// Invalid input exits with 2, anything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid_input = err.chain().any(|e| {
        e.is::<qdesk::Error>() || e.is::<serde_json::Error>() || e.is::<csv::Error>()
    });
    if invalid_input {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = dispatch(&cli.command, cli.seed).and_then(|outcome| {
        let record = RunRecord {
            schema_version: SCHEMA_VERSION.to_string(),
            command: cli.command.name().to_string(),
            config: outcome.config,
            seed: cli.seed,
            outputs: outcome.outputs,
            wall_time_s: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        if let Some(path) = &cli.csv {
            outcome.table.write(path)?;
        }
        record::emit(&record, cli.out.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
