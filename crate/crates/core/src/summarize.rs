//! Single-pass per-column summaries.
//!
//! Counting is exact. The median comes from the distinct-value table, so it
//! is exact too and needs no second pass; memory grows with the number of
//! distinct values, not with the number of rows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{IoError, OpenSource};
use crate::numeric::{is_missing, parse_decimal};

pub const DEFAULT_TOP_K: usize = 50;

/// Share of non-missing values that must parse as numbers for a column to
/// count as numeric.
const NUMERIC_SHARE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SummaryError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SniffedType {
    NumericLike,
    TextLike,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub value: String,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariableSummary {
    pub name: String,
    pub sniffed_type: SniffedType,
    pub n_rows: u64,
    pub n_missing: u64,
    pub distinct_count: usize,
    /// By count descending, then value ascending; at most K entries.
    pub top_categories: Vec<CategoryCount>,
    pub numeric: Option<NumericStats>,
}

pub fn summarize_variable(source: OpenSource, column: &str, k: usize) -> Result<VariableSummary, SummaryError> {
    let idx = source
        .meta
        .columns
        .iter()
        .position(|c| c == column)
        .ok_or_else(|| SummaryError::UnknownColumn(column.to_string()))?;
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut n_rows = 0u64;
    let mut n_missing = 0u64;
    for batch in source.batches {
        for row in batch?.rows {
            n_rows += 1;
            let cell = row.get(idx).map(String::as_str).unwrap_or("");
            if is_missing(cell) {
                n_missing += 1;
                continue;
            }
            let cell = cell.trim();
            match counts.get_mut(cell) {
                Some(n) => *n += 1,
                None => {
                    counts.insert(cell.to_string(), 1);
                }
            }
        }
    }
    Ok(finish(column, n_rows, n_missing, counts, k))
}

fn finish(name: &str, n_rows: u64, n_missing: u64, counts: HashMap<String, u64>, k: usize) -> VariableSummary {
    let mut numbers: Vec<(f64, u64)> = counts
        .iter()
        .filter_map(|(v, &n)| parse_decimal(v).map(|x| (x, n)))
        .collect();
    let present = n_rows - n_missing;
    let n_numeric: u64 = numbers.iter().map(|&(_, n)| n).sum();
    let sniffed_type = if present > 0 && n_numeric as f64 >= NUMERIC_SHARE * present as f64 {
        SniffedType::NumericLike
    } else if n_numeric > 0 {
        SniffedType::Mixed
    } else {
        SniffedType::TextLike
    };

    let numeric = (sniffed_type == SniffedType::NumericLike).then(|| {
        numbers.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sum: f64 = numbers.iter().map(|&(x, n)| x * n as f64).sum();
        let nth = |target: u64| {
            let mut seen = 0;
            for &(x, n) in &numbers {
                seen += n;
                if seen > target {
                    return x;
                }
            }
            numbers.last().expect("nonempty").0
        };
        let median = if n_numeric % 2 == 1 {
            nth(n_numeric / 2)
        } else {
            (nth(n_numeric / 2 - 1) + nth(n_numeric / 2)) / 2.0
        };
        NumericStats {
            min: numbers[0].0,
            max: numbers.last().expect("nonempty").0,
            mean: sum / n_numeric as f64,
            median,
        }
    });

    let distinct_count = counts.len();
    let mut top: Vec<CategoryCount> = counts
        .into_iter()
        .map(|(value, count)| CategoryCount { value, count })
        .collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    top.truncate(k);

    VariableSummary {
        name: name.to_string(),
        sniffed_type,
        n_rows,
        n_missing,
        distinct_count,
        top_categories: top,
        numeric,
    }
}
