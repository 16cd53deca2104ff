//! Failure classes of a run and their exit codes.

use thiserror::Error;
use torus_bubbling::admissibility::AdmissibilityError;
use torus_bubbling::census::CensusError;
use torus_bubbling::green::CacheError;
use torus_bubbling::liouville::LiouvilleError;
use torus_bubbling::partition::PartitionError;
use torus_bubbling::quadrature::QuadratureError;
use torus_bubbling::{GreenError, LatticeError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Internal(_) => 4,
            RunError::Io(_) => 1,
        }
    }

    /// Prefix a config error with the key it came from.
    pub fn at(self, key: &str) -> Self {
        match self {
            RunError::Config(m) => RunError::Config(format!("at `{key}`: {m}")),
            other => other,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Internal(format!("serialization: {e}"))
    }
}

impl From<LatticeError> for RunError {
    fn from(e: LatticeError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<GreenError> for RunError {
    fn from(e: GreenError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<CacheError> for RunError {
    fn from(e: CacheError) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<PartitionError> for RunError {
    fn from(e: PartitionError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<QuadratureError> for RunError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::Settings(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<CensusError> for RunError {
    fn from(e: CensusError) -> Self {
        match e {
            CensusError::GridTooSmall(_) | CensusError::ToleranceTooLoose(_) => RunError::Config(e.to_string()),
            CensusError::Resolution { .. } => RunError::Numerical(e.to_string()),
            CensusError::InternalConsistency(_) => RunError::Internal(e.to_string()),
        }
    }
}

impl From<AdmissibilityError> for RunError {
    fn from(e: AdmissibilityError) -> Self {
        match e {
            AdmissibilityError::Green(e) => e.into(),
            AdmissibilityError::Quadrature(e) => e.into(),
            AdmissibilityError::Partition(e) => RunError::Config(e.to_string()).at("blowup.partition"),
            AdmissibilityError::Census(e) => e.into(),
            AdmissibilityError::Config(m) => RunError::Config(m),
            AdmissibilityError::Weight { .. } => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<LiouvilleError> for RunError {
    fn from(e: LiouvilleError) -> Self {
        match e {
            LiouvilleError::Input(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}
