use std::fmt;

use crate::corpus::CorpusError;
use crate::embeddings::EmbedError;
use crate::estimator::EstimatorError;
use crate::qa::QaError;
use crate::service::ServiceError;
use crate::stats::StatsError;

/// Exit-code classes: bad arguments or preconditions, bad input data, and
/// everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Data => 3,
            ErrorKind::Internal => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Internal,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<QaError> for CliError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::InvalidConfig(_) => CliError::validation(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::InvalidArgument(_) => CliError::validation(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::InvalidArgument(_)
            | EstimatorError::MissingReference
            | EstimatorError::QeUnsupported
            | EstimatorError::DescriptorMismatch { .. } => CliError::validation(e.to_string()),
            EstimatorError::NonFiniteLoss { .. } => CliError::internal(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Validation(_) => CliError::validation(e.to_string()),
            _ => CliError::internal(e.to_string()),
        }
    }
}
