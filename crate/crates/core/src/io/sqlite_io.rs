use std::borrow::Cow;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{params, Connection, OpenFlags};

use super::{check_width, BatchStream, IoError, RowBatch, RowSink};
use crate::numeric::format_number;

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn cell_text(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => String::new(),
        ValueRef::Integer(i) => i.to_string(),
        ValueRef::Real(f) => format_number(f),
        ValueRef::Text(t) | ValueRef::Blob(t) => String::from_utf8_lossy(t).into_owned(),
    }
}

pub(super) fn open(
    path: &Path,
    table: &str,
    chunk_size: usize,
) -> Result<(Vec<String>, Option<u64>, BatchStream), IoError> {
    let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(|e| IoError::BadFormat(format!("cannot open sqlite file: {e}")))?;
    let exists: i64 = conn
        .query_row(
            "SELECT count(*) FROM sqlite_master WHERE type IN ('table','view') AND name = ?1",
            [table],
            |r| r.get(0),
        )
        .map_err(|e| IoError::BadFormat(format!("not a sqlite database: {e}")))?;
    if exists == 0 {
        return Err(IoError::UnknownTable(table.to_string()));
    }
    let qt = quote_ident(table);
    let columns: Vec<String> = {
        let mut stmt = conn.prepare(&format!("PRAGMA table_info({qt})"))?;
        let names = stmt.query_map([], |r| r.get::<_, String>(1))?;
        names.collect::<Result<_, _>>()?
    };
    let count: i64 = conn.query_row(&format!("SELECT count(*) FROM {qt}"), [], |r| r.get(0))?;

    // keyset paging on rowid keeps each batch query O(chunk); views and
    // WITHOUT ROWID tables fall back to OFFSET paging
    let keyset = conn.prepare(&format!("SELECT _rowid_ FROM {qt} LIMIT 0")).is_ok();
    let select_cols = columns.iter().map(|c| quote_ident(c)).collect::<Vec<_>>().join(", ");
    let sql = if keyset {
        format!("SELECT _rowid_, {select_cols} FROM {qt} WHERE _rowid_ > ?1 ORDER BY _rowid_ LIMIT ?2")
    } else {
        format!("SELECT 0, {select_cols} FROM {qt} LIMIT ?2 OFFSET ?1")
    };
    let width = columns.len();
    let mut cursor: i64 = if keyset { i64::MIN } else { 0 };
    let mut next_index = 0usize;
    let mut done = false;
    let stream = std::iter::from_fn(move || {
        if done {
            return None;
        }
        let fetch = || -> Result<(Vec<Vec<String>>, i64), IoError> {
            let mut stmt = conn.prepare_cached(&sql)?;
            let mut rows = stmt.query(params![cursor, chunk_size as i64])?;
            let mut out = Vec::with_capacity(chunk_size.min(65_536));
            let mut last = cursor;
            while let Some(row) = rows.next()? {
                last = row.get::<_, i64>(0)?;
                out.push(
                    (1..=width)
                        .map(|i| row.get_ref(i).map(cell_text))
                        .collect::<Result<_, _>>()?,
                );
            }
            Ok((out, last))
        };
        match fetch() {
            Err(e) => {
                done = true;
                Some(Err(e))
            }
            Ok((rows, _)) if rows.is_empty() => {
                done = true;
                None
            }
            Ok((rows, last)) => {
                cursor = if keyset { last } else { cursor + rows.len() as i64 };
                let batch = RowBatch {
                    start_index: next_index,
                    rows,
                };
                next_index += batch.rows.len();
                Some(Ok(batch))
            }
        }
    });
    Ok((columns, Some(count as u64), Box::new(stream)))
}

/// Writes one table of TEXT columns, replacing any existing table of that name.
pub struct SqliteSink {
    conn: Connection,
    insert_sql: String,
    columns: Vec<String>,
    rows: usize,
}

const COMMIT_EVERY: usize = 20_000;

impl SqliteSink {
    pub fn create(path: &Path, table: &str, columns: Vec<String>) -> Result<Self, IoError> {
        let conn = Connection::open(path)?;
        let qt = quote_ident(table);
        let defs = columns
            .iter()
            .map(|c| format!("{} TEXT", quote_ident(c)))
            .collect::<Vec<_>>()
            .join(", ");
        conn.execute_batch(&format!(
            "DROP TABLE IF EXISTS {qt}; CREATE TABLE {qt} ({defs}); BEGIN;"
        ))?;
        let placeholders = (1..=columns.len())
            .map(|i| format!("?{i}"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(SqliteSink {
            conn,
            insert_sql: format!("INSERT INTO {qt} VALUES ({placeholders})"),
            columns,
            rows: 0,
        })
    }
}

impl RowSink for SqliteSink {
    fn columns(&self) -> &[String] {
        &self.columns
    }

    fn write_row(&mut self, cells: &[Cow<'_, str>]) -> Result<(), IoError> {
        check_width(self.columns.len(), self.rows, cells.len())?;
        {
            let mut stmt = self.conn.prepare_cached(&self.insert_sql)?;
            stmt.execute(rusqlite::params_from_iter(cells.iter().map(|c| c.as_ref())))
                .map_err(|e| IoError::at(self.rows, e))?;
        }
        self.rows += 1;
        if self.rows.is_multiple_of(COMMIT_EVERY) {
            self.conn.execute_batch("COMMIT; BEGIN;")?;
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> Result<(), IoError> {
        self.conn.execute_batch("COMMIT;")?;
        self.conn.close().map_err(|(_, e)| IoError::from(e))
    }
}
