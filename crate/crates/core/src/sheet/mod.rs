//! The two metadata documents that drive a recode: the variable sheet (one
//! row per recoded variable) and the variable details sheet (one row per
//! output category).
//!
//! Both are UTF-8 CSV with a mandatory header row. Known columns are read
//! into typed fields; any other column is carried through untouched so that
//! sheets written by other tools survive a parse/serialize cycle.

mod details;
mod rule;
mod validate;
mod variables;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use details::{parse_details_sheet, serialize_details_sheet, DetailsRow, DetailsSheet, RecEnd};
pub use rule::{parse_match_rule, Interval, MatchRule, RuleError};
pub use validate::{validate_sheets, Finding, Location, Severity, SheetKind, ValidationReport};
pub use variables::{parse_variable_sheet, serialize_variable_sheet, VariableEntry, VariableSheet};

/// Row numbers in errors are 1-based data rows (the header is row 0).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheetError {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("variable `{name}` defined more than once (rows {rows:?})")]
    DuplicateVariable { name: String, rows: Vec<usize> },
    #[error("row {row}: bad {column} value {value:?}")]
    BadType { row: usize, column: String, value: String },
    #[error("row {row}: {source}")]
    UnparseableRule {
        row: usize,
        #[source]
        source: RuleError,
    },
    #[error("row {row}: inconsistent types: {message}")]
    InconsistentTypes { row: usize, message: String },
    #[error("row {row}: bad `{column}`: {message}")]
    BadField {
        row: usize,
        column: String,
        message: String,
    },
}

const DERIVED_PREFIX: &str = "DerivedVar::";

/// One `db::name` pair, or a bare default name when `database` is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceBinding {
    pub database: Option<String>,
    pub name: String,
}

/// Contents of a `variableStart` cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariableStart {
    Source(Vec<SourceBinding>),
    Derived(Vec<String>),
}

impl VariableStart {
    pub fn parse(cell: &str) -> Result<VariableStart, String> {
        let cell = cell.trim();
        if let Some(rest) = cell.strip_prefix(DERIVED_PREFIX) {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| format!("expected {DERIVED_PREFIX}[a,b,...]"))?;
            let components = split_list(inner);
            if components.is_empty() {
                return Err("derived variable needs at least one component".into());
            }
            for (i, c) in components.iter().enumerate() {
                if components[..i].contains(c) {
                    return Err(format!("duplicate component `{c}`"));
                }
            }
            return Ok(VariableStart::Derived(components));
        }
        let mut bindings: Vec<SourceBinding> = Vec::new();
        for token in cell.split(',').map(str::trim) {
            if token.is_empty() {
                return Err("empty source reference".into());
            }
            let binding = match token.split_once("::") {
                Some((db, name)) => {
                    let (db, name) = (db.trim(), name.trim());
                    if db.is_empty() || name.is_empty() || name.contains("::") {
                        return Err(format!("bad source reference `{token}`"));
                    }
                    SourceBinding {
                        database: Some(db.to_string()),
                        name: name.to_string(),
                    }
                }
                None => {
                    let name = token
                        .strip_prefix('[')
                        .and_then(|t| t.strip_suffix(']'))
                        .unwrap_or(token)
                        .trim();
                    if name.is_empty() {
                        return Err(format!("bad source reference `{token}`"));
                    }
                    SourceBinding {
                        database: None,
                        name: name.to_string(),
                    }
                }
            };
            if bindings.iter().any(|b| b.database == binding.database) {
                return Err(match &binding.database {
                    Some(db) => format!("database `{db}` bound twice"),
                    None => "more than one default source name".into(),
                });
            }
            bindings.push(binding);
        }
        Ok(VariableStart::Source(bindings))
    }

    pub fn is_derived(&self) -> bool {
        matches!(self, VariableStart::Derived(_))
    }

    pub fn components(&self) -> Option<&[String]> {
        match self {
            VariableStart::Derived(c) => Some(c),
            VariableStart::Source(_) => None,
        }
    }

    /// Source column for `database`: the explicit binding, else the default.
    pub fn resolve(&self, database: &str) -> Option<&str> {
        let VariableStart::Source(bindings) = self else {
            return None;
        };
        bindings
            .iter()
            .find(|b| b.database.as_deref() == Some(database))
            .or_else(|| bindings.iter().find(|b| b.database.is_none()))
            .map(|b| b.name.as_str())
    }

    /// Databases named explicitly in `db::name` pairs.
    pub fn databases(&self) -> impl Iterator<Item = &str> {
        let bindings: &[SourceBinding] = match self {
            VariableStart::Source(b) => b,
            VariableStart::Derived(_) => &[],
        };
        bindings.iter().filter_map(|b| b.database.as_deref())
    }
}

impl fmt::Display for VariableStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableStart::Derived(c) => write!(f, "{DERIVED_PREFIX}[{}]", c.join(", ")),
            VariableStart::Source(bindings) => {
                for (i, b) in bindings.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match &b.database {
                        Some(db) => write!(f, "{db}::{}", b.name)?,
                        None => f.write_str(&b.name)?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Comma-separated list with trimmed, nonempty items.
pub(crate) fn split_list(cell: &str) -> Vec<String> {
    cell.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// A parsed CSV document: header plus trimmed cells.
pub(crate) struct CsvDoc {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn parse(bytes: &[u8]) -> Result<CsvDoc, SheetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(bytes);
        let header = rdr
            .headers()
            .map_err(|e| SheetError::Csv(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        if header.iter().all(|h| h.is_empty()) {
            return Err(SheetError::Csv("missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SheetError::Csv(e.to_string()))?;
            // blank spreadsheet lines
            if rec.iter().all(|c| c.trim().is_empty()) {
                continue;
            }
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(CsvDoc { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, SheetError> {
        self.column(name)
            .ok_or_else(|| SheetError::MissingColumn(name.to_string()))
    }

    /// Header columns not in `known`, with their indices.
    pub fn extras(&self, known: &[&str]) -> Vec<(usize, String)> {
        self.header
            .iter()
            .enumerate()
            .filter(|(_, h)| !known.contains(&h.as_str()))
            .map(|(i, h)| (i, h.clone()))
            .collect()
    }
}

pub(crate) fn opt(s: &str) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

pub(crate) fn write_csv(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("write to Vec cannot fail");
    for row in rows {
        w.write_record(&row).expect("write to Vec cannot fail");
    }
    w.into_inner().expect("flush to Vec cannot fail")
}

/// Appends a row given as `column -> cell` to a serialized sheet. Columns the
/// sheet does not have are rejected; omitted ones stay empty.
pub(crate) fn append_cells(serialized: &[u8], cells: &BTreeMap<String, String>) -> Result<Vec<u8>, SheetError> {
    let doc = CsvDoc::parse(serialized)?;
    let row = doc.rows.len() + 1;
    if let Some(unknown) = cells.keys().find(|k| doc.column(k).is_none()) {
        return Err(SheetError::BadField {
            row,
            column: unknown.clone(),
            message: "the sheet has no such column".into(),
        });
    }
    if cells.values().all(|c| c.trim().is_empty()) {
        return Err(SheetError::BadField {
            row,
            column: "variable".into(),
            message: "empty row".into(),
        });
    }
    let new_row = doc
        .header
        .iter()
        .map(|h| cells.get(h).cloned().unwrap_or_default())
        .collect();
    Ok(write_csv(
        &doc.header,
        doc.rows.into_iter().chain(std::iter::once(new_row)),
    ))
}
