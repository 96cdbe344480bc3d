use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DetailsSheet, MatchRule, VariableSheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetKind {
    Variables,
    Details,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub sheet: SheetKind,
    /// 1-based data row.
    pub row: Option<usize>,
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub location: Location,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub errors: Vec<Finding>,
}

impl ValidationReport {
    fn push(&mut self, severity: Severity, sheet: SheetKind, row: usize, column: &str, msg: String) {
        self.errors.push(Finding {
            severity,
            location: Location {
                sheet,
                row: Some(row),
                column: Some(column.to_string()),
            },
            message: msg,
        });
    }

    pub fn error_count(&self) -> usize {
        self.errors.iter().filter(|f| f.severity == Severity::Error).count()
    }

    pub fn warning_count(&self) -> usize {
        self.errors.len() - self.error_count()
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let sheet = match self.location.sheet {
            SheetKind::Variables => "variables",
            SheetKind::Details => "details",
        };
        write!(f, "{sev}: {sheet}")?;
        if let Some(row) = self.location.row {
            write!(f, " row {row}")?;
        }
        if let Some(col) = &self.location.column {
            write!(f, " [{col}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.errors {
            writeln!(f, "{finding}")?;
        }
        write!(
            f,
            "{} error(s), {} warning(s): {}",
            self.error_count(),
            self.warning_count(),
            if self.ok { "ok" } else { "invalid" }
        )
    }
}

/// Cross-checks the two sheets. Never fails: every finding lands in the report.
pub fn validate_sheets(vs: &VariableSheet, ds: &DetailsSheet) -> ValidationReport {
    use Severity::*;
    use SheetKind::*;
    let mut report = ValidationReport::default();

    for (i, e) in vs.entries.iter().enumerate() {
        let row = i + 1;
        if e.database_start.is_empty() {
            report.push(
                Error,
                Variables,
                row,
                "databaseStart",
                "no source database listed".into(),
            );
        }
        for db in e.variable_start.databases() {
            if !e.database_start.iter().any(|d| d == db) {
                report.push(
                    Error,
                    Variables,
                    row,
                    "variableStart",
                    format!("database `{db}` is not listed in databaseStart"),
                );
            }
        }
        if let Some(components) = e.variable_start.components() {
            for c in components {
                if vs.get(c).is_none() {
                    report.push(
                        Error,
                        Variables,
                        row,
                        "variableStart",
                        format!("component `{c}` is not a recoded variable"),
                    );
                }
            }
        }
        if !e.is_derived() {
            for db in &e.database_start {
                if e.variable_start.resolve(db).is_none() {
                    report.push(
                        Error,
                        Variables,
                        row,
                        "variableStart",
                        format!("no source variable for database `{db}`"),
                    );
                }
            }
        }
        if !ds.rows.iter().any(|r| r.variable == e.variable) {
            report.push(
                Warning,
                Variables,
                row,
                "variable",
                format!("`{}` has no rows in the details sheet", e.variable),
            );
        }
    }

    // (variable, database) -> rows in sheet order
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.rows.iter().enumerate() {
        let row = i + 1;
        let entry = vs.get(&r.variable);
        match entry {
            None => report.push(
                Error,
                Details,
                row,
                "variable",
                format!("`{}` is not defined in the variable sheet", r.variable),
            ),
            Some(entry) => {
                if entry.variable_type != r.type_end {
                    report.push(
                        Error,
                        Details,
                        row,
                        "typeEnd",
                        format!(
                            "typeEnd {} disagrees with variableType {} in the variable sheet",
                            r.type_end, entry.variable_type
                        ),
                    );
                }
                if entry.is_derived() != r.is_derived() {
                    report.push(
                        Error,
                        Details,
                        row,
                        "variableStart",
                        "derived/non-derived mismatch with the variable sheet".into(),
                    );
                }
                for db in &r.database_start {
                    if !entry.database_start.contains(db) {
                        report.push(
                            Warning,
                            Details,
                            row,
                            "databaseStart",
                            format!("database `{db}` not listed for `{}` in the variable sheet", r.variable),
                        );
                    }
                }
            }
        }
        if r.database_start.is_empty() {
            report.push(Error, Details, row, "databaseStart", "no source database listed".into());
        }
        if let Err(msg) = r.check_types() {
            report.push(Error, Details, row, "recStart", msg);
        }
        if let Some(components) = r.variable_start.components() {
            for c in components {
                if c == &r.variable {
                    report.push(
                        Error,
                        Details,
                        row,
                        "variableStart",
                        format!("`{c}` is derived from itself"),
                    );
                } else if vs.get(c).is_none() {
                    report.push(
                        Error,
                        Details,
                        row,
                        "variableStart",
                        format!("component `{c}` is not a recoded variable in the variable sheet"),
                    );
                }
            }
        } else {
            for db in &r.database_start {
                if r.variable_start.resolve(db).is_none() {
                    report.push(
                        Error,
                        Details,
                        row,
                        "variableStart",
                        format!("no source variable for database `{db}`"),
                    );
                }
            }
        }
        for db in &r.database_start {
            groups.entry((r.variable.as_str(), db.as_str())).or_default().push(i);
        }
    }

    for ((variable, db), idxs) in &groups {
        let elses: Vec<usize> = idxs
            .iter()
            .copied()
            .filter(|&i| ds.rows[i].rec_start.is_else())
            .collect();
        if elses.len() > 1 {
            report.push(
                Error,
                Details,
                elses[1] + 1,
                "recStart",
                format!(
                    "`{variable}` has {} else rules for database `{db}` (rows {})",
                    elses.len(),
                    elses.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ")
                ),
            );
        }
        let mut seen_codes: BTreeSet<&str> = BTreeSet::new();
        for (k, &i) in idxs.iter().enumerate() {
            match &ds.rows[i].rec_start {
                MatchRule::Interval(a) => {
                    for &j in &idxs[..k] {
                        if let MatchRule::Interval(b) = &ds.rows[j].rec_start {
                            if a.overlaps(b) {
                                report.push(
                                    Warning,
                                    Details,
                                    i + 1,
                                    "recStart",
                                    format!(
                                        "interval {a} overlaps row {} ({b}) for `{variable}`/`{db}`; the earlier row wins",
                                        j + 1
                                    ),
                                );
                            }
                        }
                    }
                }
                MatchRule::ValueSet { values } => {
                    for v in values {
                        if !seen_codes.insert(v) {
                            report.push(
                                Warning,
                                Details,
                                i + 1,
                                "recStart",
                                format!("code {v:?} already matched by an earlier row for `{variable}`/`{db}`"),
                            );
                        }
                    }
                }
                _ => {}
            }
        }
    }

    report.ok = report.error_count() == 0;
    report
}
