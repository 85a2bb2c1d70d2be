//! Front end for `mixedrobust`: JSON configs in, JSON reports, CSV and SVG out.

pub mod builtin;
pub mod config;
pub mod repro;
pub mod report;
pub mod run;
pub mod svg;

use mixedrobust::mixed::MixedError;
use mixedrobust::param::ParamError;
use mixedrobust::region::RegionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("method error: {0}")]
    Method(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Method(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<MixedError> for CliError {
    fn from(e: MixedError) -> Self {
        let msg = e.to_string();
        match e {
            MixedError::Domain(_)
            | MixedError::Param(ParamError::InvalidParams(_))
            | MixedError::Region(RegionError::InvalidParams(_)) => CliError::Config(msg),
            MixedError::Region(RegionError::DegeneratePolygon { .. }) => CliError::Internal(msg),
            _ => CliError::Method(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
