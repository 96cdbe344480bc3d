use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{check_width, BatchStream, IoError, RowBatch, RowSink};

pub(super) fn open(path: &Path, chunk_size: usize) -> Result<(Vec<String>, BatchStream), IoError> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::with_capacity(1 << 16, file));
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| IoError::BadFormat(format!("header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if columns.len() == 1 && columns[0].is_empty() {
        return Err(IoError::BadFormat("empty header row".into()));
    }
    let mut records = rdr.into_records();
    let mut next_index = 0usize;
    let mut failed = false;
    let stream = std::iter::from_fn(move || {
        if failed {
            return None;
        }
        let mut rows = Vec::new();
        while rows.len() < chunk_size {
            match records.next() {
                None => break,
                Some(Ok(rec)) => rows.push(rec.iter().map(str::to_string).collect()),
                Some(Err(e)) => {
                    failed = true;
                    let row = next_index + rows.len();
                    return Some(Err(match e.kind() {
                        csv::ErrorKind::UnequalLengths { .. } => IoError::BadFormat(format!("row {row}: {e}")),
                        _ => IoError::at(row, e),
                    }));
                }
            }
        }
        if rows.is_empty() {
            return None;
        }
        let batch = RowBatch {
            start_index: next_index,
            rows,
        };
        next_index += batch.rows.len();
        Some(Ok(batch))
    });
    Ok((columns, Box::new(stream)))
}

/// RFC 4180 CSV output with LF line endings.
pub struct CsvSink<W: Write + Send> {
    writer: csv::Writer<W>,
    columns: Vec<String>,
    rows: usize,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, columns: Vec<String>) -> Result<Self, IoError> {
        let file = File::create(path)?;
        CsvSink::new(BufWriter::with_capacity(1 << 16, file), columns)
    }
}

impl<W: Write + Send> CsvSink<W> {
    pub fn new(inner: W, columns: Vec<String>) -> Result<Self, IoError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(inner);
        writer.write_record(&columns).map_err(IoError::io)?;
        Ok(CsvSink {
            writer,
            columns,
            rows: 0,
        })
    }
}

impl<W: Write + Send> RowSink for CsvSink<W> {
    fn columns(&self) -> &[String] {
        &self.columns
    }

    fn write_row(&mut self, cells: &[Cow<'_, str>]) -> Result<(), IoError> {
        check_width(self.columns.len(), self.rows, cells.len())?;
        self.writer
            .write_record(cells.iter().map(|c| c.as_bytes()))
            .map_err(|e| IoError::at(self.rows, e))?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self: Box<Self>) -> Result<(), IoError> {
        self.writer.flush()?;
        Ok(())
    }
}
