//! Compiling sheets into a [`RecodePlan`] and applying it to rows.

mod engine;
mod plan;
mod stats;
mod stream;

use thiserror::Error;

pub use engine::{BoundPlan, RowOutcome};
pub use plan::{apply_from_dvl, compile_plan, CompiledRule, DerivedRequest, RecodePlan, RuleOutput, VariablePlan};
pub use stats::{NaBreakdown, RunStats};
pub use stream::{recode_stream, Progress, RecodeOptions};

use crate::dvl::DvlError;
use crate::io::IoError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("sheets do not validate ({errors} error(s)); first: {first}")]
    InvalidSheets { errors: usize, first: String },
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
    #[error("`{name}` is not a recoded variable for database `{database}`")]
    UnknownVariable { name: String, database: String },
    #[error("cyclic derivation: {}", .0.join(" -> "))]
    CyclicDerivation(Vec<String>),
    #[error("derived variable `{name}` needs component `{component}`, which is not in the plan")]
    MissingComponent { name: String, component: String },
    #[error("no expression supplied for derived variable `{0}`")]
    MissingDerivedSpec(String),
    #[error("derived variable `{name}` does not match the sheets: {message}")]
    DerivedMismatch { name: String, message: String },
    #[error("output column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("{0}")]
    SourceMismatch(String),
    #[error(transparent)]
    Dvl(#[from] DvlError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecodeError {
    #[error("source has no column `{column}` (needed by `{variable}`)")]
    MissingSourceColumn { column: String, variable: String },
    #[error("row {row}: `{value}` matches no rule of `{variable}`")]
    Unmatched {
        row: usize,
        variable: String,
        value: String,
    },
    #[error("sink columns do not match the plan")]
    SinkMismatch,
    #[error(transparent)]
    Io(#[from] IoError),
}
