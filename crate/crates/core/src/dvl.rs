//! Derived variables and the shareable Derived Variable Library (DVL).
//!
//! A library is an append-only map from derived-variable name to its
//! versions. Each version is content-addressed by the SHA-256 of the spec's
//! canonical JSON (sorted keys, no whitespace), so a given `(name, version)`
//! always resolves to the same bytes.
//!
//! On disk a library is a directory holding `catalog.csv` and
//! `specs/<hash>.json`. The documentation CSV is the portable exchange form;
//! importing an exported document reproduces the catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{check_expr, parse_expression, Expr, SyntaxError, TypeError};
use crate::sheet::{split_list, write_csv, CsvDoc, SheetError};
use crate::value::VariableType;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DvlError {
    #[error("invalid derived variable spec: {0}")]
    InvalidSpec(String),
    #[error("`{name}`: {source}")]
    Syntax {
        name: String,
        #[source]
        source: SyntaxError,
    },
    #[error("`{name}`: {source}")]
    Type {
        name: String,
        #[source]
        source: TypeError,
    },
    #[error("`{name}` declares output type {declared} but its expression yields {inferred}")]
    OutputTypeMismatch {
        name: String,
        declared: VariableType,
        inferred: VariableType,
    },
    #[error("no derived variable named `{0}` in the library")]
    UnknownName(String),
    #[error("`{name}` has no version {version}")]
    UnknownVersion { name: String, version: usize },
    #[error("`{name}`: content hash {recorded} does not match spec ({computed})")]
    HashMismatch {
        name: String,
        recorded: String,
        computed: String,
    },
    #[error("bad documentation CSV: {0}")]
    Doc(String),
    #[error("library I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for DvlError {
    fn from(e: std::io::Error) -> Self {
        DvlError::Io(e.to_string())
    }
}

impl From<SheetError> for DvlError {
    fn from(e: SheetError) -> Self {
        DvlError::Doc(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedVariableSpec {
    pub name: String,
    pub components: Vec<String>,
    pub function_name: String,
    pub function_body: String,
    pub output_type: VariableType,
    #[serde(default)]
    pub notes: Option<String>,
}

/// A spec whose expression has been parsed and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledDerived {
    pub spec: DerivedVariableSpec,
    pub expr: Expr,
    pub content_hash: String,
    /// Author and creation time when the spec came from a library.
    pub provenance: Option<(String, String)>,
}

impl DerivedVariableSpec {
    /// Canonical JSON: sorted keys, no insignificant whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    fn structural_check(&self) -> Result<(), DvlError> {
        let bad = |m: String| Err(DvlError::InvalidSpec(m));
        if self.name.trim().is_empty() || self.name != self.name.trim() {
            return bad(format!("bad name {:?}", self.name));
        }
        if self.components.is_empty() {
            return bad(format!("`{}` has no components", self.name));
        }
        let mut seen = BTreeSet::new();
        for c in &self.components {
            if c.trim().is_empty() || c.contains(',') {
                return bad(format!("`{}` has a bad component name {c:?}", self.name));
            }
            if !seen.insert(c) {
                return bad(format!("`{}` lists component `{c}` twice", self.name));
            }
        }
        let valid_fn = {
            let mut ch = self.function_name.chars();
            matches!(ch.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
                && ch.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        };
        if !valid_fn {
            return bad(format!("bad function name {:?}", self.function_name));
        }
        Ok(())
    }

    /// Parses and type-checks the body.
    ///
    /// With `types`, components are checked at exactly those types. Without,
    /// the spec is accepted if some categorical/continuous assignment of the
    /// referenced components makes it check at the declared output type.
    pub fn compile(&self, types: Option<&BTreeMap<String, VariableType>>) -> Result<Expr, DvlError> {
        self.structural_check()?;
        let expr = parse_expression(&self.function_body).map_err(|source| DvlError::Syntax {
            name: self.name.clone(),
            source,
        })?;
        let type_err = |source| DvlError::Type {
            name: self.name.clone(),
            source,
        };
        let referenced: Vec<String> = expr.idents().into_iter().map(str::to_string).collect();
        for ident in &referenced {
            if !self.components.contains(ident) {
                return Err(type_err(TypeError::UnboundIdent(ident.clone())));
            }
        }
        let check_at = |env: &BTreeMap<String, VariableType>| -> Result<(), DvlError> {
            let inferred = check_expr(&expr, env).map_err(type_err)?;
            if inferred != self.output_type {
                return Err(DvlError::OutputTypeMismatch {
                    name: self.name.clone(),
                    declared: self.output_type,
                    inferred,
                });
            }
            Ok(())
        };
        match types {
            Some(types) => {
                let env: BTreeMap<String, VariableType> = self
                    .components
                    .iter()
                    .filter_map(|c| types.get(c).map(|t| (c.clone(), *t)))
                    .collect();
                check_at(&env)?;
            }
            None => {
                const MAX_ENUMERATED: usize = 12;
                if referenced.len() > MAX_ENUMERATED {
                    return Ok(expr);
                }
                let mut last_err = None;
                let mut found = false;
                for mask in 0u32..(1 << referenced.len()) {
                    let env = referenced
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let t = if mask & (1 << i) == 0 {
                                VariableType::Categorical
                            } else {
                                VariableType::Continuous
                            };
                            (c.clone(), t)
                        })
                        .collect();
                    match check_at(&env) {
                        Ok(()) => {
                            found = true;
                            break;
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                if !found {
                    return Err(last_err.expect("at least one assignment was tried"));
                }
            }
        }
        Ok(expr)
    }

    pub fn compiled(&self, types: Option<&BTreeMap<String, VariableType>>) -> Result<CompiledDerived, DvlError> {
        Ok(CompiledDerived {
            expr: self.compile(types)?,
            content_hash: self.content_hash(),
            spec: self.clone(),
            provenance: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DvlVersion {
    pub spec: DerivedVariableSpec,
    pub created_at: String,
    pub author: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AddOutcome {
    pub content_hash: String,
    /// 1-based version number of the (possibly pre-existing) entry.
    pub version: usize,
    /// The identical spec was already present; nothing was added.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogEntry {
    pub name: String,
    pub versions: usize,
    pub latest_hash: String,
    pub output_type: VariableType,
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivedVariableLibrary {
    entries: BTreeMap<String, Vec<DvlVersion>>,
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl DerivedVariableLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&mut self, spec: DerivedVariableSpec, author: &str) -> Result<AddOutcome, DvlError> {
        self.add_at(spec, author, &now_timestamp())
    }

    pub fn add_at(
        &mut self,
        spec: DerivedVariableSpec,
        author: &str,
        created_at: &str,
    ) -> Result<AddOutcome, DvlError> {
        spec.compile(None)?;
        let hash = spec.content_hash();
        let versions = self.entries.entry(spec.name.clone()).or_default();
        if let Some(pos) = versions.iter().position(|v| v.content_hash == hash) {
            return Ok(AddOutcome {
                content_hash: hash,
                version: pos + 1,
                duplicate: true,
            });
        }
        versions.push(DvlVersion {
            spec,
            created_at: created_at.to_string(),
            author: author.to_string(),
            content_hash: hash.clone(),
        });
        Ok(AddOutcome {
            content_hash: hash,
            version: versions.len(),
            duplicate: false,
        })
    }

    /// Latest version when `version` is `None`; versions are 1-based.
    pub fn get(&self, name: &str, version: Option<usize>) -> Result<&DvlVersion, DvlError> {
        let versions = self
            .entries
            .get(name)
            .ok_or_else(|| DvlError::UnknownName(name.to_string()))?;
        match version {
            None => Ok(versions.last().expect("entries never hold empty version lists")),
            Some(v) => versions.get(v.wrapping_sub(1)).ok_or_else(|| DvlError::UnknownVersion {
                name: name.to_string(),
                version: v,
            }),
        }
    }

    pub fn versions(&self, name: &str) -> Option<&[DvlVersion]> {
        self.entries.get(name).map(Vec::as_slice)
    }

    pub fn list(&self) -> Vec<CatalogEntry> {
        self.entries
            .iter()
            .map(|(name, versions)| {
                let latest = versions.last().expect("nonempty");
                CatalogEntry {
                    name: name.clone(),
                    versions: versions.len(),
                    latest_hash: latest.content_hash.clone(),
                    output_type: latest.spec.output_type,
                    components: latest.spec.components.clone(),
                }
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DvlVersion> {
        self.entries.values().flatten()
    }

    /// Documentation CSV with one row per stored version.
    pub fn export_doc(&self) -> Vec<u8> {
        doc_csv(self.iter().map(|v| DocRow {
            spec: &v.spec,
            hash: &v.content_hash,
            author: &v.author,
            created_at: &v.created_at,
        }))
    }

    /// Rebuilds a library from a documentation CSV, verifying every hash.
    /// Row order determines version order within a name.
    pub fn import_doc(bytes: &[u8]) -> Result<Self, DvlError> {
        let mut lib = DerivedVariableLibrary::new();
        lib.merge_doc(bytes)?;
        Ok(lib)
    }

    /// Appends every version from `bytes`; already-present hashes are skipped.
    pub fn merge_doc(&mut self, bytes: &[u8]) -> Result<Vec<AddOutcome>, DvlError> {
        let doc = CsvDoc::parse(bytes)?;
        let idx = |c: &str| doc.require(c);
        let (name, comps, fname, body, otype, hash, author, created) = (
            idx("name")?,
            idx("components")?,
            idx("functionName")?,
            idx("functionBody")?,
            idx("outputType")?,
            idx("contentHash")?,
            idx("author")?,
            idx("createdAt")?,
        );
        let notes = doc.column("notes");
        let mut out = Vec::new();
        for (i, row) in doc.rows.iter().enumerate() {
            let output_type = row[otype]
                .parse::<VariableType>()
                .map_err(|v| DvlError::Doc(format!("row {}: bad outputType {v:?}", i + 1)))?;
            let spec = DerivedVariableSpec {
                name: row[name].clone(),
                components: split_list(&row[comps]),
                function_name: row[fname].clone(),
                function_body: row[body].clone(),
                output_type,
                notes: notes.map(|c| row[c].clone()).filter(|s| !s.is_empty()),
            };
            let computed = spec.content_hash();
            if !row[hash].is_empty() && row[hash] != computed {
                return Err(DvlError::HashMismatch {
                    name: spec.name,
                    recorded: row[hash].clone(),
                    computed,
                });
            }
            out.push(self.add_at(spec, &row[author], &row[created])?);
        }
        Ok(out)
    }
}

pub(crate) struct DocRow<'a> {
    pub spec: &'a DerivedVariableSpec,
    pub hash: &'a str,
    pub author: &'a str,
    pub created_at: &'a str,
}

pub const DOC_COLUMNS: [&str; 9] = [
    "name",
    "components",
    "functionName",
    "functionBody",
    "outputType",
    "contentHash",
    "author",
    "createdAt",
    "notes",
];

pub(crate) fn doc_csv<'a>(rows: impl Iterator<Item = DocRow<'a>>) -> Vec<u8> {
    let header: Vec<String> = DOC_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(
        &header,
        rows.map(|r| {
            vec![
                r.spec.name.clone(),
                r.spec.components.join(", "),
                r.spec.function_name.clone(),
                r.spec.function_body.clone(),
                r.spec.output_type.to_string(),
                r.hash.to_string(),
                r.author.to_string(),
                r.created_at.to_string(),
                r.spec.notes.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// Documentation for the derived columns of one run, in plan order.
pub fn export_run_doc(derived: &[CompiledDerived]) -> Vec<u8> {
    doc_csv(derived.iter().map(|d| {
        let (author, created_at) = d
            .provenance
            .as_ref()
            .map(|(a, c)| (a.as_str(), c.as_str()))
            .unwrap_or(("", ""));
        DocRow {
            spec: &d.spec,
            hash: &d.content_hash,
            author,
            created_at,
        }
    }))
}

/// Directory-backed library: `catalog.csv` plus `specs/<hash>.json`.
///
/// Writers must be serialized by the caller; the catalog is replaced
/// atomically so concurrent readers always see a complete file.
#[derive(Debug, Clone)]
pub struct DvlStore {
    dir: PathBuf,
}

const CATALOG_COLUMNS: [&str; 5] = ["name", "version", "contentHash", "author", "createdAt"];

impl DvlStore {
    /// Opens `dir`, creating an empty library there if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, DvlError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("specs"))?;
        let store = DvlStore { dir };
        if !store.catalog_path().exists() {
            store.write_catalog(&DerivedVariableLibrary::new())?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn catalog_path(&self) -> PathBuf {
        self.dir.join("catalog.csv")
    }

    fn spec_path(&self, hash: &str) -> PathBuf {
        self.dir.join("specs").join(format!("{hash}.json"))
    }

    pub fn load(&self) -> Result<DerivedVariableLibrary, DvlError> {
        let bytes = fs::read(self.catalog_path())?;
        let doc = CsvDoc::parse(&bytes)?;
        let col = |c: &str| doc.require(c);
        let (name, version, hash, author, created) = (
            col("name")?,
            col("version")?,
            col("contentHash")?,
            col("author")?,
            col("createdAt")?,
        );
        let mut lib = DerivedVariableLibrary::new();
        for row in &doc.rows {
            let spec_bytes = fs::read(self.spec_path(&row[hash]))?;
            let spec: DerivedVariableSpec =
                serde_json::from_slice(&spec_bytes).map_err(|e| DvlError::Doc(format!("{}: {e}", row[hash])))?;
            let computed = spec.content_hash();
            if computed != row[hash] || spec.name != row[name] {
                return Err(DvlError::HashMismatch {
                    name: row[name].clone(),
                    recorded: row[hash].clone(),
                    computed,
                });
            }
            let outcome = lib.add_at(spec, &row[author], &row[created])?;
            if outcome.version.to_string() != row[version] {
                return Err(DvlError::Doc(format!(
                    "catalog lists `{}` version {} out of order",
                    row[name], row[version]
                )));
            }
        }
        Ok(lib)
    }

    /// Adds a spec and persists it. Duplicates leave the directory untouched.
    pub fn add(&self, spec: DerivedVariableSpec, author: &str) -> Result<AddOutcome, DvlError> {
        let mut lib = self.load()?;
        let outcome = lib.add(spec, author)?;
        if !outcome.duplicate {
            self.persist(&lib)?;
        }
        Ok(outcome)
    }

    /// Imports a documentation CSV into this directory.
    pub fn import_doc(&self, bytes: &[u8]) -> Result<Vec<AddOutcome>, DvlError> {
        let mut lib = self.load()?;
        let outcomes = lib.merge_doc(bytes)?;
        self.persist(&lib)?;
        Ok(outcomes)
    }

    fn persist(&self, lib: &DerivedVariableLibrary) -> Result<(), DvlError> {
        for v in lib.iter() {
            let path = self.spec_path(&v.content_hash);
            // content-addressed: never rewrite an existing spec file
            if !path.exists() {
                write_atomic(&path, v.spec.canonical_json().as_bytes())?;
            }
        }
        self.write_catalog(lib)
    }

    fn write_catalog(&self, lib: &DerivedVariableLibrary) -> Result<(), DvlError> {
        let header: Vec<String> = CATALOG_COLUMNS.iter().map(|s| s.to_string()).collect();
        let rows = lib.entries.values().flat_map(|versions| {
            versions.iter().enumerate().map(|(i, v)| {
                vec![
                    v.spec.name.clone(),
                    (i + 1).to_string(),
                    v.content_hash.clone(),
                    v.author.clone(),
                    v.created_at.clone(),
                ]
            })
        });
        write_atomic(&self.catalog_path(), &write_csv(&header, rows))
    }

    /// Raw bytes of a stored spec.
    pub fn spec_bytes(&self, hash: &str) -> Result<Vec<u8>, DvlError> {
        Ok(fs::read(self.spec_path(hash))?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DvlError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
