use std::path::{Path, PathBuf};

use lvcprobe_core::calibrate::CalibrationError;
use lvcprobe_core::conllu::ConlluError;
use lvcprobe_core::eval::EvalError;
use lvcprobe_core::featurize::FeaturizeError;
use lvcprobe_core::logreg::TrainError;
use lvcprobe_core::supervision::SupervisionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 usage or config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(path: &Path, msg: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {msg}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } | TrainError::Divergence { .. } => CliError::Numerical(e.to_string()),
            TrainError::InvalidLambda(_) | TrainError::InvalidFraction(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::NonFinite(_) => CliError::Numerical(e.to_string()),
            CalibrationError::InvalidFloor(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FeaturizeError> for CliError {
    fn from(e: FeaturizeError) -> Self {
        match e {
            FeaturizeError::InvalidNgramMax | FeaturizeError::InvalidMaxFeatures => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SupervisionError> for CliError {
    fn from(e: SupervisionError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConlluError> for CliError {
    fn from(e: ConlluError) -> Self {
        CliError::Data(e.to_string())
    }
}
