use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{append_cells, opt, split_list, write_csv, CsvDoc, SheetError, VariableStart};
use crate::value::VariableType;

const COLUMNS: [&str; 8] = [
    "variable",
    "label",
    "labelLong",
    "section",
    "variableType",
    "units",
    "databaseStart",
    "variableStart",
];

const REQUIRED: [&str; 4] = ["variable", "variableType", "databaseStart", "variableStart"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariableEntry {
    pub variable: String,
    pub label: Option<String>,
    pub label_long: Option<String>,
    pub section: Option<String>,
    pub variable_type: VariableType,
    pub units: Option<String>,
    pub database_start: Vec<String>,
    pub variable_start: VariableStart,
    /// Values of the sheet's extra columns, aligned with `VariableSheet::extra_columns`.
    #[serde(default)]
    pub extras: Vec<String>,
}

impl VariableEntry {
    pub fn new(
        variable: impl Into<String>,
        variable_type: VariableType,
        database_start: Vec<String>,
        variable_start: VariableStart,
    ) -> Self {
        VariableEntry {
            variable: variable.into(),
            label: None,
            label_long: None,
            section: None,
            variable_type,
            units: None,
            database_start,
            variable_start,
            extras: Vec::new(),
        }
    }

    pub fn is_derived(&self) -> bool {
        self.variable_start.is_derived()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariableSheet {
    pub extra_columns: Vec<String>,
    pub entries: Vec<VariableEntry>,
}

impl VariableSheet {
    pub fn get(&self, variable: &str) -> Option<&VariableEntry> {
        self.entries.iter().find(|e| e.variable == variable)
    }

    pub fn with_row(&self, cells: &BTreeMap<String, String>) -> Result<VariableSheet, SheetError> {
        parse_variable_sheet(&append_cells(&serialize_variable_sheet(self), cells)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn parse_variable_sheet(bytes: &[u8]) -> Result<VariableSheet, SheetError> {
    let doc = CsvDoc::parse(bytes)?;
    for col in REQUIRED {
        doc.require(col)?;
    }
    let col = |name: &str| doc.column(name);
    let extras = doc.extras(&COLUMNS);

    let mut entries = Vec::with_capacity(doc.rows.len());
    let mut seen: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, cells) in doc.rows.iter().enumerate() {
        let row = i + 1;
        let get = |name: &str| col(name).map(|c| cells[c].as_str()).unwrap_or("");

        let variable = get("variable").to_string();
        if variable.is_empty() {
            return Err(SheetError::BadField {
                row,
                column: "variable".into(),
                message: "empty variable name".into(),
            });
        }
        let variable_type = get("variableType")
            .parse::<VariableType>()
            .map_err(|value| SheetError::BadType {
                row,
                column: "variableType".into(),
                value,
            })?;
        let variable_start = VariableStart::parse(get("variableStart")).map_err(|message| SheetError::BadField {
            row,
            column: "variableStart".into(),
            message,
        })?;
        seen.entry(variable.clone()).or_default().push(row);
        entries.push(VariableEntry {
            variable,
            label: opt(get("label")),
            label_long: opt(get("labelLong")),
            section: opt(get("section")),
            variable_type,
            units: opt(get("units")),
            database_start: split_list(get("databaseStart")),
            variable_start,
            extras: extras.iter().map(|(c, _)| cells[*c].clone()).collect(),
        });
    }
    if let Some((name, rows)) = seen.into_iter().find(|(_, rows)| rows.len() > 1) {
        return Err(SheetError::DuplicateVariable { name, rows });
    }
    Ok(VariableSheet {
        extra_columns: extras.into_iter().map(|(_, h)| h).collect(),
        entries,
    })
}

pub fn serialize_variable_sheet(sheet: &VariableSheet) -> Vec<u8> {
    let header: Vec<String> = COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(sheet.extra_columns.iter().cloned())
        .collect();
    let width = sheet.extra_columns.len();
    let rows = sheet.entries.iter().map(|e| {
        let mut row = vec![
            e.variable.clone(),
            e.label.clone().unwrap_or_default(),
            e.label_long.clone().unwrap_or_default(),
            e.section.clone().unwrap_or_default(),
            e.variable_type.to_string(),
            e.units.clone().unwrap_or_default(),
            e.database_start.join(", "),
            e.variable_start.to_string(),
        ];
        row.extend(e.extras.iter().cloned());
        row.resize(COLUMNS.len() + width, String::new());
        row
    });
    write_csv(&header, rows)
}
