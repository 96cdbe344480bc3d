//! Hash-based record of a recode run.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dvl::DerivedVariableSpec;
use crate::io::{open_source, Format, IoError, SourceSpec};
use crate::recode::{RecodeOptions, RunStats};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SheetRef {
    pub path: Option<PathBuf>,
    /// Hash of the canonical serialization, so line endings and cell padding
    /// in the original file do not matter.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceRef {
    pub format: Format,
    pub path: PathBuf,
    pub table: Option<String>,
    pub size_bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedRef {
    pub name: String,
    pub content_hash: String,
    pub author: Option<String>,
    pub created_at: Option<String>,
    pub spec: DerivedVariableSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DvlKind {
    /// A library directory.
    Dir,
    /// A documentation CSV.
    Doc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DvlRef {
    pub kind: DvlKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputRef {
    pub format: Format,
    pub path: PathBuf,
    pub table: Option<String>,
    /// For sqlite output: hash of the table dumped as CSV.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub schema_version: u32,
    pub engine_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub database: String,
    pub variables: SheetRef,
    pub details: SheetRef,
    pub source: SourceRef,
    pub selected: Vec<String>,
    pub passthrough: Vec<String>,
    /// Every derived column, with the library version it came from.
    pub derived: Vec<DerivedRef>,
    /// Derived names requested from the library, as given.
    #[serde(default)]
    pub derive: Vec<String>,
    pub dvl: Option<DvlRef>,
    pub chunk_size: usize,
    pub options: RecodeOptions,
    pub output: OutputRef,
    pub stats: RunStats,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Size and SHA-256 of a file, read in blocks.
pub fn hash_file(path: &Path) -> Result<(u64, String), IoError> {
    let mut file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IoError::NotFound(path.display().to_string()),
        _ => IoError::io(e),
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut size = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        size += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((size, hex::encode(hasher.finalize())))
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Hash identifying a recoded output. CSV files hash their bytes; sqlite
/// tables hash the CSV the same rows would have produced.
pub fn hash_output(format: Format, path: &Path, table: Option<&str>) -> Result<String, IoError> {
    match format {
        Format::Csv => Ok(hash_file(path)?.1),
        Format::Sqlite => {
            let table = table.ok_or_else(|| IoError::BadFormat("sqlite output needs a table name".into()))?;
            let src = open_source(&SourceSpec::sqlite(path, table))?;
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(HashWriter(Sha256::new()));
            w.write_record(&src.meta.columns).map_err(IoError::io)?;
            for batch in src.batches {
                for row in batch?.rows {
                    w.write_record(&row).map_err(IoError::io)?;
                }
            }
            let inner = w.into_inner().map_err(|e| IoError::io(e.error()))?;
            Ok(hex::encode(inner.0.finalize()))
        }
    }
}
