//! Experiment runner behind the `btgd` binary. Each subcommand reads an
//! [`ExperimentConfig`], applies flag overrides, and writes CSV and JSON files
//! into the output directory.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

pub use config::{ExperimentConfig, FinderConfig, SaddleConfig, StartSpec, SweepConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, unknown names or invalid parameters. Exit code 2, nothing written.
    Config(String),
    /// A numerical failure during a run. Exit code 3, after partial outputs are flushed.
    Numerical(String),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(..) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<btgd::Error> for CliError {
    fn from(e: btgd::Error) -> Self {
        use btgd::Error::*;
        match e {
            InvalidParameter(_) | DimensionMismatch { .. } | NotASaddle(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub function: Option<String>,
    pub optimizers: Vec<String>,
    pub z0: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(name) = &self.function {
            cfg.function = Some(btgd::registry::FunctionConfig::from_name(name)?);
        }
        if !self.optimizers.is_empty() {
            let parsed = self
                .optimizers
                .iter()
                .map(|n| btgd::registry::OptimizerConfig::from_name(n))
                .collect::<btgd::Result<Vec<_>>>()?;
            cfg.optimizer = Some(parsed[0].clone());
            cfg.optimizers = parsed;
        }
        if let Some(z0) = &self.z0 {
            cfg.z0 = StartSpec::Point(z0.clone());
        }
        Ok(())
    }
}
