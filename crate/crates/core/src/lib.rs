//! Metadata-driven recoding of tabular data.
//!
//! Two CSV documents drive everything: a variable sheet (one row per output
//! variable) and a details sheet (one row per output category or rule).
//! They compile into a [`recode::RecodePlan`] that is applied row by row to
//! a streamed CSV or SQLite source.

pub mod dvl;
pub mod error;
pub mod exec;
pub mod expr;
pub mod io;
pub mod manifest;
pub mod numeric;
pub mod pipeline;
pub mod recode;
pub mod sheet;
pub mod summarize;
pub mod value;

#[cfg(test)]
mod fixtures;

pub use error::{ErrorClass, HarmonizeError};
pub use exec::ExecMode;
pub use value::{NaCode, OutputValue, VariableType};
