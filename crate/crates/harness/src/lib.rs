//! Instance files, independent verification, grid oracles, SVG plots and the
//! `masspart` command line on top of `masspart-core`.

pub mod cli;
pub mod demo;
pub mod generate;
pub mod instance;
pub mod oracle;
pub mod plot;
pub mod report;
pub mod run;
pub mod verify;

use masspart_core::error::MassError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Mass(#[from] MassError),
    #[error("oracle grid over {0} parameters is too large (at most {max})", max = oracle::MAX_PARAMETERS)]
    SearchSpaceTooLarge(usize),
    #[error("malformed solution: {0}")]
    MalformedSolution(String),
    #[error("plots support dimensions 1 to 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("{0}")]
    Usage(String),
}
