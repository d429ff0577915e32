//! Command-line pipeline: preprocess, train, fit, sample, evaluate,
//! classify and synth.

mod commands;
mod meta;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::autodiff::CheckpointError;
use crate::eval::EvalError;
use crate::flow::FlowError;
use crate::mesh::MeshError;
use crate::ssm::SsmError;
use crate::synth::SynthError;

pub use commands::{ClassifyArgs, EvaluateArgs, FitArgs, PreprocessArgs, RunConfig, SampleArgs, SynthArgs, TrainArgs};
pub use meta::{DirLock, LOCK_FILE};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FLOWSSM_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Parse { .. } | MeshError::Io(_) => CliError::Io(e.to_string()),
            MeshError::NonFinite => CliError::Numeric(e.to_string()),
            MeshError::Topology(_) | MeshError::EmptyPointSet => CliError::Config(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Config(_) => CliError::Config(e.to_string()),
            FlowError::Mesh(m) => m.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Io(format!("checkpoint: {e}"))
    }
}

impl From<SsmError> for CliError {
    fn from(e: SsmError) -> Self {
        match e {
            SsmError::Data(_) | SsmError::Config(_) | SsmError::NotTrained | SsmError::Latent(_) => {
                CliError::Config(e.to_string())
            }
            SsmError::NonFiniteLoss(_) | SsmError::Tensor(_) => CliError::Numeric(e.to_string()),
            SsmError::Checkpoint(c) => c.into(),
            SsmError::Flow(f) => f.into(),
            SsmError::Mesh(m) => m.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Ssm(s) => s.into(),
            EvalError::Mesh(m) => m.into(),
            EvalError::DegenerateLabels | EvalError::Data(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => CliError::Io(e.to_string()),
            SynthError::Mesh(m) => m.into(),
            SynthError::Ssm(s) => s.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    crate::fsutil::write_atomic(path, bytes).map_err(|e| CliError::io(path, e))
}

#[derive(Parser, Debug)]
#[command(name = "flowssm", version, about = "Statistical shape models from neural flow deformations")]
pub struct Cli {
    /// Log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rigidly align meshes to a template and rescale them into [-1, 1].
    Preprocess(PreprocessArgs),
    /// Train a model from a JSON run configuration.
    Train(TrainArgs),
    /// Fit a trained model to a mesh or point cloud.
    Fit(FitArgs),
    /// Draw random shapes from a trained model.
    Sample(SampleArgs),
    /// Generality and specificity of a trained model.
    Evaluate(EvaluateArgs),
    /// Linear-SVM Monte-Carlo classification of latent features.
    Classify(ClassifyArgs),
    /// Generate a synthetic shape family.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModeArg {
    Symmetric,
    /// Deformed→target for meshes (partial surfaces), target→deformed for
    /// point clouds.
    #[value(alias = "one_sided")]
    OneSided,
    #[value(alias = "one_sided_deformed_to_target")]
    OneSidedDeformedToTarget,
    #[value(alias = "one_sided_target_to_deformed")]
    OneSidedTargetToDeformed,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // a second initialisation (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Train(a) => commands::train(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}

/// Entry point of the binary: parses `std::env::args`, runs, maps errors to
/// exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Mesh files (`.obj`, `.ply`) directly inside `dir`, sorted by name.
pub(crate) fn list_meshes(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.is_file() && crate::mesh::MeshFormat::from_path(&p).is_some() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
