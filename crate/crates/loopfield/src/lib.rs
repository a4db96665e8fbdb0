//! Monte Carlo sampling of two-dimensional lattice Yang-Mills, experiment
//! runner and report emitter for master loop equation checks.

pub mod config;
pub mod diagnostics;
pub mod experiments;
pub mod fixtures;
pub mod mc;
pub mod report;
pub mod sampler;
pub mod stats;

use loopfield_core::action::ActionError;
use loopfield_core::driver::DriverError;
use loopfield_core::equation::EquationError;
use loopfield_core::loops::LoopError;
use thiserror::Error;

use crate::sampler::SamplerError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical certification failed: {0}")]
    Certification(String),
    #[error("computation failed: {0}")]
    Computation(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for everything
    /// that stops a computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<ActionError> for Error {
    fn from(e: ActionError) -> Self {
        match e {
            ActionError::NotConverged { .. } | ActionError::CutoffExceeded { .. } => Error::Certification(e.to_string()),
            ActionError::BadParameter(_) => Error::Config(e.to_string()),
            _ => Error::Computation(e.to_string()),
        }
    }
}

impl From<DriverError> for Error {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::Action(a) => a.into(),
            DriverError::Infeasible(_) | DriverError::NotIntegral { .. } => Error::Config(e.to_string()),
            _ => Error::Computation(e.to_string()),
        }
    }
}

impl From<LoopError> for Error {
    fn from(e: LoopError) -> Self {
        Error::Computation(e.to_string())
    }
}

impl From<EquationError> for Error {
    fn from(e: EquationError) -> Self {
        match e {
            EquationError::Driver(d) => d.into(),
            EquationError::Loop(l) => l.into(),
            EquationError::Domain(_) => Error::Config(e.to_string()),
        }
    }
}
