//! Tabular sources and sinks.
//!
//! Every value is surfaced as text; typing happens in the engine, driven by
//! the sheets. Sources stream rows in bounded [`RowBatch`]es so memory use
//! depends on the chunk size, not on the file size.

mod csv_io;
mod sqlite_io;

use std::borrow::Cow;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::CsvSink;
pub use sqlite_io::SqliteSink;

use crate::exec::{map_rows, ExecMode};
use crate::numeric::is_missing;

pub const DEFAULT_CHUNK_SIZE: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad format: {0}")]
    BadFormat(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unsupported format `{0}`; convert the file to CSV or SQLite first")]
    UnsupportedFormat(String),
    #[error("row {row}: expected {expected} columns, got {got}")]
    ColumnMismatch { row: usize, expected: usize, got: usize },
    #[error("{}{message}", row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    Io { row: Option<usize>, message: String },
}

impl IoError {
    pub(crate) fn io(message: impl fmt::Display) -> Self {
        IoError::Io {
            row: None,
            message: message.to_string(),
        }
    }

    pub(crate) fn at(row: usize, message: impl fmt::Display) -> Self {
        IoError::Io {
            row: Some(row),
            message: message.to_string(),
        }
    }
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::io(e)
    }
}

impl From<rusqlite::Error> for IoError {
    fn from(e: rusqlite::Error) -> Self {
        IoError::io(format!("sqlite: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Sqlite,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Sqlite => "sqlite",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "sqlite" | "sqlite3" | "db" => Ok(Format::Sqlite),
            "sas7bdat" | "sas" | "rds" => Err(IoError::UnsupportedFormat(s.trim().to_string())),
            other => Err(IoError::BadFormat(format!("unknown format `{other}`"))),
        }
    }
}

/// Where and how to read a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceSpec {
    pub format: Format,
    pub location: PathBuf,
    #[serde(default)]
    pub table: Option<String>,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default)]
    pub dataset_name: Option<String>,
}

fn default_chunk() -> usize {
    DEFAULT_CHUNK_SIZE
}

impl SourceSpec {
    pub fn csv(location: impl Into<PathBuf>) -> Self {
        SourceSpec {
            format: Format::Csv,
            location: location.into(),
            table: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            dataset_name: None,
        }
    }

    pub fn sqlite(location: impl Into<PathBuf>, table: impl Into<String>) -> Self {
        SourceSpec {
            format: Format::Sqlite,
            location: location.into(),
            table: Some(table.into()),
            chunk_size: DEFAULT_CHUNK_SIZE,
            dataset_name: None,
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }
}

/// Metadata of an opened source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TabularSource {
    pub format: Format,
    pub location: PathBuf,
    pub table: Option<String>,
    pub columns: Vec<String>,
    pub row_count_hint: Option<u64>,
    pub dataset_name: Option<String>,
}

/// Consecutive rows of a source. `start_index` is the 0-based index of the
/// first row; batches arrive gap-free and in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowBatch {
    pub start_index: usize,
    pub rows: Vec<Vec<String>>,
}

impl RowBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub type BatchStream = Box<dyn Iterator<Item = Result<RowBatch, IoError>> + Send>;

pub struct OpenSource {
    pub meta: TabularSource,
    pub batches: BatchStream,
}

impl fmt::Debug for OpenSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenSource")
            .field("meta", &self.meta)
            .finish_non_exhaustive()
    }
}

pub fn open_source(spec: &SourceSpec) -> Result<OpenSource, IoError> {
    if spec.chunk_size == 0 {
        return Err(IoError::BadFormat("chunk size must be at least 1".into()));
    }
    if !spec.location.exists() {
        return Err(IoError::NotFound(spec.location.display().to_string()));
    }
    let (columns, row_count_hint, batches) = match spec.format {
        Format::Csv => {
            if spec.table.is_some() {
                return Err(IoError::BadFormat("a table name only applies to sqlite sources".into()));
            }
            let (cols, stream) = csv_io::open(&spec.location, spec.chunk_size)?;
            (cols, None, stream)
        }
        Format::Sqlite => {
            let table = spec
                .table
                .as_deref()
                .ok_or_else(|| IoError::BadFormat("sqlite sources need a table name".into()))?;
            sqlite_io::open(&spec.location, table, spec.chunk_size)?
        }
    };
    if columns.is_empty() {
        return Err(IoError::BadFormat("source has no columns".into()));
    }
    Ok(OpenSource {
        meta: TabularSource {
            format: spec.format,
            location: spec.location.clone(),
            table: spec.table.clone(),
            columns,
            row_count_hint,
            dataset_name: spec.dataset_name.clone(),
        },
        batches,
    })
}

/// Single-writer row destination with a fixed column set.
pub trait RowSink: Send {
    fn columns(&self) -> &[String];

    fn write_row(&mut self, cells: &[Cow<'_, str>]) -> Result<(), IoError>;

    /// Flushes and closes the destination.
    fn finish(self: Box<Self>) -> Result<(), IoError>;
}

pub(crate) fn check_width(sink_cols: usize, row: usize, got: usize) -> Result<(), IoError> {
    if sink_cols != got {
        return Err(IoError::ColumnMismatch {
            row,
            expected: sink_cols,
            got,
        });
    }
    Ok(())
}

pub fn open_sink(
    format: Format,
    location: &Path,
    table: Option<&str>,
    columns: Vec<String>,
) -> Result<Box<dyn RowSink>, IoError> {
    Ok(match format {
        Format::Csv => Box::new(CsvSink::create(location, columns)?),
        Format::Sqlite => {
            let table = table.ok_or_else(|| IoError::BadFormat("sqlite output needs a table name".into()))?;
            Box::new(SqliteSink::create(location, table, columns)?)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MissingCount {
    pub rows: u64,
    pub columns: usize,
    pub cells: u64,
    pub missing: u64,
    /// `missing / cells`, 0 for an empty table.
    pub fraction: f64,
}

/// Counts missing cells (empty, `NA`, `NaN`) across the whole source.
pub fn count_missing(source: OpenSource, mode: ExecMode) -> Result<MissingCount, IoError> {
    let columns = source.meta.columns.len();
    let mut rows = 0u64;
    let mut missing = 0u64;
    for batch in source.batches {
        let batch = batch?;
        rows += batch.rows.len() as u64;
        missing += map_rows(mode, &batch.rows, |row| {
            row.iter().filter(|c| is_missing(c)).count() as u64
        })
        .into_iter()
        .sum::<u64>();
    }
    let cells = rows * columns as u64;
    Ok(MissingCount {
        rows,
        columns,
        cells,
        missing,
        fraction: if cells == 0 { 0.0 } else { missing as f64 / cells as f64 },
    })
}
