use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::rule::{parse_match_rule, MatchRule};
use super::{append_cells, opt, split_list, write_csv, CsvDoc, SheetError, VariableStart};
use crate::value::{NaCode, VariableType};

const COLUMNS: [&str; 11] = [
    "variable",
    "typeEnd",
    "typeStart",
    "databaseStart",
    "variableStart",
    "recEnd",
    "catLabel",
    "catLabelLong",
    "units",
    "recStart",
    "notes",
];

const REQUIRED: [&str; 7] = [
    "variable",
    "typeEnd",
    "typeStart",
    "databaseStart",
    "variableStart",
    "recEnd",
    "recStart",
];

const FUNC_PREFIX: &str = "Func::";

/// Target side of a details row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum RecEnd {
    /// Category code, or a numeric literal when `typeEnd` is continuous.
    Value(String),
    /// Pass the matched source value through.
    Copy,
    Na(NaCode),
    /// Derived rows name the function that computes them.
    Func(String),
}

impl RecEnd {
    pub fn parse(cell: &str) -> Result<RecEnd, String> {
        let cell = cell.trim();
        if cell.is_empty() {
            return Err("empty recEnd".into());
        }
        if cell == "copy" {
            return Ok(RecEnd::Copy);
        }
        if cell.starts_with("NA::") {
            return NaCode::parse_token(cell)
                .map(RecEnd::Na)
                .ok_or_else(|| format!("bad NA code {cell:?}"));
        }
        if let Some(name) = cell.strip_prefix(FUNC_PREFIX) {
            let name = name.trim();
            if name.is_empty() {
                return Err("empty function name".into());
            }
            return Ok(RecEnd::Func(name.to_string()));
        }
        Ok(RecEnd::Value(cell.to_string()))
    }
}

impl fmt::Display for RecEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecEnd::Value(v) => f.write_str(v),
            RecEnd::Copy => f.write_str("copy"),
            RecEnd::Na(code) => f.write_str(&code.sheet_token()),
            RecEnd::Func(name) => write!(f, "{FUNC_PREFIX}{name}"),
        }
    }
}

/// One output category, or one derived-variable declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetailsRow {
    pub variable: String,
    pub type_end: VariableType,
    pub type_start: VariableType,
    pub database_start: Vec<String>,
    pub variable_start: VariableStart,
    pub rec_end: RecEnd,
    pub cat_label: Option<String>,
    pub cat_label_long: Option<String>,
    pub units: Option<String>,
    pub rec_start: MatchRule,
    pub notes: Option<String>,
    #[serde(default)]
    pub extras: Vec<String>,
}

impl DetailsRow {
    pub fn is_derived(&self) -> bool {
        self.variable_start.is_derived()
    }

    pub fn applies_to(&self, database: &str) -> bool {
        self.database_start.iter().any(|d| d == database)
    }

    /// Row-local consistency between the declared types and the rule form.
    pub fn check_types(&self) -> Result<(), String> {
        if matches!(self.rec_start, MatchRule::Interval(_)) && self.type_start != VariableType::Continuous {
            return Err("interval rule requires typeStart = continuous".into());
        }
        if self.rec_start == MatchRule::Copy
            && self.type_start == VariableType::Categorical
            && self.type_end == VariableType::Continuous
        {
            return Err("copy from categorical source cannot produce continuous output".into());
        }
        if self.rec_end == RecEnd::Copy && self.type_start != self.type_end {
            return Err("recEnd copy requires typeStart = typeEnd".into());
        }
        if let RecEnd::Value(v) = &self.rec_end {
            if self.type_end == VariableType::Continuous && crate::numeric::parse_decimal(v).is_none() {
                return Err(format!("continuous output needs a number, got {v:?}"));
            }
        }
        match (&self.rec_end, self.is_derived()) {
            (RecEnd::Func(_), false) => Err("Func:: output requires a DerivedVar:: source".into()),
            (RecEnd::Func(_), true) => Ok(()),
            (_, true) => Err("derived rows must name their function with Func::".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetailsSheet {
    pub extra_columns: Vec<String>,
    pub rows: Vec<DetailsRow>,
}

impl DetailsSheet {
    pub fn rows_for<'a>(
        &'a self,
        variable: &'a str,
        database: &'a str,
    ) -> impl Iterator<Item = (usize, &'a DetailsRow)> + 'a {
        self.rows
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.variable == variable && r.applies_to(database))
    }

    /// The sheet with one more row, parsed from named cells.
    pub fn with_row(&self, cells: &BTreeMap<String, String>) -> Result<DetailsSheet, SheetError> {
        parse_details_sheet(&append_cells(&serialize_details_sheet(self), cells)?)
    }

    pub fn databases(&self) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .flat_map(|r| r.database_start.iter().map(String::as_str))
    }
}

pub fn parse_details_sheet(bytes: &[u8]) -> Result<DetailsSheet, SheetError> {
    let doc = CsvDoc::parse(bytes)?;
    for col in REQUIRED {
        doc.require(col)?;
    }
    let extras = doc.extras(&COLUMNS);
    let mut rows = Vec::with_capacity(doc.rows.len());
    for (i, cells) in doc.rows.iter().enumerate() {
        let row = i + 1;
        let get = |name: &str| doc.column(name).map(|c| cells[c].as_str()).unwrap_or("");
        let bad = |column: &str, message: String| SheetError::BadField {
            row,
            column: column.to_string(),
            message,
        };
        let ty = |column: &str| {
            get(column)
                .parse::<VariableType>()
                .map_err(|value| SheetError::BadType {
                    row,
                    column: column.to_string(),
                    value,
                })
        };

        let variable = get("variable").to_string();
        if variable.is_empty() {
            return Err(bad("variable", "empty variable name".into()));
        }
        let type_end = ty("typeEnd")?;
        let type_start = ty("typeStart")?;
        let variable_start = VariableStart::parse(get("variableStart")).map_err(|m| bad("variableStart", m))?;
        let rec_end = RecEnd::parse(get("recEnd")).map_err(|m| bad("recEnd", m))?;
        let rec_start_text = get("recStart");
        let rec_start = if rec_start_text.is_empty() && variable_start.is_derived() {
            MatchRule::Else
        } else {
            parse_match_rule(rec_start_text).map_err(|source| SheetError::UnparseableRule { row, source })?
        };
        let details = DetailsRow {
            variable,
            type_end,
            type_start,
            database_start: split_list(get("databaseStart")),
            variable_start,
            rec_end,
            cat_label: opt(get("catLabel")),
            cat_label_long: opt(get("catLabelLong")),
            units: opt(get("units")),
            rec_start,
            notes: opt(get("notes")),
            extras: extras.iter().map(|(c, _)| cells[*c].clone()).collect(),
        };
        details
            .check_types()
            .map_err(|message| SheetError::InconsistentTypes { row, message })?;
        rows.push(details);
    }
    Ok(DetailsSheet {
        extra_columns: extras.into_iter().map(|(_, h)| h).collect(),
        rows,
    })
}

pub fn serialize_details_sheet(sheet: &DetailsSheet) -> Vec<u8> {
    let header: Vec<String> = COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(sheet.extra_columns.iter().cloned())
        .collect();
    let width = COLUMNS.len() + sheet.extra_columns.len();
    let rows = sheet.rows.iter().map(|r| {
        let mut row = vec![
            r.variable.clone(),
            r.type_end.to_string(),
            r.type_start.to_string(),
            r.database_start.join(", "),
            r.variable_start.to_string(),
            r.rec_end.to_string(),
            r.cat_label.clone().unwrap_or_default(),
            r.cat_label_long.clone().unwrap_or_default(),
            r.units.clone().unwrap_or_default(),
            r.rec_start.to_string(),
            r.notes.clone().unwrap_or_default(),
        ];
        row.extend(r.extras.iter().cloned());
        row.resize(width, String::new());
        row
    });
    write_csv(&header, rows)
}
