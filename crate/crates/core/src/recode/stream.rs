use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{RecodeError, RecodePlan, RowOutcome, RunStats};
use crate::exec::{map_rows, ExecMode};
use crate::io::{OpenSource, RowSink};
use crate::value::OutputValue;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecodeOptions {
    pub mode: ExecMode,
    /// Fail on a present value that matches no rule instead of writing NA(b).
    pub strict_unmatched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Progress {
    pub rows_done: u64,
    pub rows_total: Option<u64>,
}

/// Recodes every batch of `source` into `sink`, in input order, and closes
/// the sink. Rows inside a batch may be processed in parallel; writing is
/// sequential.
pub fn recode_stream(
    plan: &RecodePlan,
    source: OpenSource,
    mut sink: Box<dyn RowSink>,
    options: RecodeOptions,
    progress: &mut dyn FnMut(Progress),
) -> Result<RunStats, RecodeError> {
    let columns = plan.output_columns();
    if sink.columns() != columns.as_slice() {
        return Err(RecodeError::SinkMismatch);
    }
    let bound = plan.bind(&source.meta.columns)?;
    let total = source.meta.row_count_hint;
    let mut stats = RunStats::default();
    let mut na: Vec<super::NaBreakdown> = vec![Default::default(); columns.len()];
    let mut unmatched = vec![0u64; plan.variables.len()];

    for batch in source.batches {
        let batch = batch?;
        let outcomes: Vec<RowOutcome> = map_rows(options.mode, &batch.rows, |row| bound.recode_row(row));
        let mut cells: Vec<Cow<'_, str>> = Vec::with_capacity(columns.len());
        for (offset, outcome) in outcomes.iter().enumerate() {
            if let Some(&var) = outcome.unmatched.first() {
                if options.strict_unmatched {
                    let v = &plan.variables[var];
                    let src = &source.meta.columns;
                    let col = src.iter().position(|c| *c == v.source_column).unwrap_or(0);
                    return Err(RecodeError::Unmatched {
                        row: batch.start_index + offset,
                        variable: v.name.clone(),
                        value: batch.rows[offset].get(col).cloned().unwrap_or_default(),
                    });
                }
            }
            for &var in &outcome.unmatched {
                unmatched[var] += 1;
            }
            cells.clear();
            for (slot, value) in outcome.values.iter().enumerate() {
                if let OutputValue::Na(code) = value {
                    na[slot].add(*code);
                }
                cells.push(value.to_cell());
            }
            sink.write_row(&cells)?;
        }
        stats.rows_in += batch.rows.len() as u64;
        stats.rows_out += outcomes.len() as u64;
        progress(Progress {
            rows_done: stats.rows_out,
            rows_total: total,
        });
    }
    sink.finish()?;

    for (name, counts) in columns.iter().zip(na) {
        if counts.total > 0 {
            stats.na_counts.insert(name.clone(), counts);
        }
    }
    for (v, n) in plan.variables.iter().zip(unmatched) {
        if n > 0 {
            stats.unmatched.insert(v.name.clone(), n);
        }
    }
    Ok(stats)
}
