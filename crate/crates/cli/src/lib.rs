//! Experiment harnesses and CLI plumbing for the stable-rank network
//! library: configuration, dataset loading, statistical tests, and the
//! registry of experiment commands exposed by the `srnet` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod idx;
pub mod stats;

use thiserror::Error;

/// Process exit codes: 0 success, 2 config error, 3 numerical failure,
/// 4 data error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<srnet_core::network::NetworkError> for CliError {
    fn from(e: srnet_core::network::NetworkError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<srnet_core::sampler::SamplerError> for CliError {
    fn from(e: srnet_core::sampler::SamplerError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<srnet_core::kernels::KernelError> for CliError {
    fn from(e: srnet_core::kernels::KernelError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<srnet_core::geometry::GeometryError> for CliError {
    fn from(e: srnet_core::geometry::GeometryError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<srnet_core::linalg::LinalgError> for CliError {
    fn from(e: srnet_core::linalg::LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

/// Writing results (the out dir is part of the config contract).
pub fn io_config_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("output io: {e}"))
}
