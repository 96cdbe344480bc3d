use thiserror::Error;

use crate::dvl::DvlError;
use crate::io::IoError;
use crate::recode::{PlanError, RecodeError};
use crate::sheet::SheetError;
use crate::summarize::SummaryError;

/// Any failure of a top-level operation, grouped into stable classes.
#[derive(Debug, Error)]
pub enum HarmonizeError {
    #[error("{context}: {source}")]
    Sheet {
        context: String,
        #[source]
        source: SheetError,
    },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Dvl(#[from] DvlError),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Plan,
    Internal,
}

impl ErrorClass {
    /// Process exit code. Stable: 1 validation, 2 I/O, 3 plan, 4 internal.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 1,
            ErrorClass::Io => 2,
            ErrorClass::Plan => 3,
            ErrorClass::Internal => 4,
        }
    }
}

impl HarmonizeError {
    pub fn sheet(context: impl Into<String>, source: SheetError) -> Self {
        HarmonizeError::Sheet {
            context: context.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            HarmonizeError::Sheet { .. } | HarmonizeError::Validation(_) => ErrorClass::Validation,
            HarmonizeError::Io(_) => ErrorClass::Io,
            HarmonizeError::Plan(PlanError::InvalidSheets { .. }) => ErrorClass::Validation,
            HarmonizeError::Plan(_) => ErrorClass::Plan,
            HarmonizeError::Dvl(DvlError::Io(_)) => ErrorClass::Io,
            HarmonizeError::Dvl(_) => ErrorClass::Plan,
            HarmonizeError::Internal(_) => ErrorClass::Internal,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}

impl From<RecodeError> for HarmonizeError {
    fn from(e: RecodeError) -> Self {
        match e {
            RecodeError::Io(e) => HarmonizeError::Io(e),
            RecodeError::Unmatched { .. } => HarmonizeError::Validation(e.to_string()),
            RecodeError::MissingSourceColumn { .. } | RecodeError::SinkMismatch => {
                HarmonizeError::Plan(PlanError::SourceMismatch(e.to_string()))
            }
        }
    }
}

impl From<SummaryError> for HarmonizeError {
    fn from(e: SummaryError) -> Self {
        match e {
            SummaryError::Io(e) => HarmonizeError::Io(e),
            SummaryError::UnknownColumn(_) => HarmonizeError::Plan(PlanError::SourceMismatch(e.to_string())),
        }
    }
}
