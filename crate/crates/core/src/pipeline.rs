//! End-to-end recode runs shared by the CLI and the service, so both produce
//! the same bytes for the same inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dvl::{export_run_doc, DerivedVariableLibrary, DerivedVariableSpec, DvlError, DvlStore};
use crate::error::HarmonizeError;
use crate::io::{open_sink, open_source, Format, IoError, SourceSpec};
use crate::manifest::{
    hash_file, hash_output, sha256_hex, DerivedRef, DvlKind, DvlRef, OutputRef, RunManifest, SheetRef, SourceRef,
    ENGINE_VERSION, MANIFEST_SCHEMA_VERSION,
};
use crate::recode::{
    apply_from_dvl, compile_plan, recode_stream, DerivedRequest, PlanError, Progress, RecodeOptions, RecodePlan,
};
use crate::sheet::{
    parse_details_sheet, parse_variable_sheet, serialize_details_sheet, serialize_variable_sheet, DetailsSheet,
    VariableSheet,
};

/// Passthrough entry meaning "every source column, in source order".
pub const ALL_COLUMNS: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputSpec {
    pub format: Format,
    pub path: PathBuf,
    #[serde(default)]
    pub table: Option<String>,
}

#[derive(Debug, Clone)]
pub enum DvlSource {
    Dir(PathBuf),
    Doc(PathBuf),
    Library(DerivedVariableLibrary),
}

impl DvlSource {
    pub fn load(&self) -> Result<DerivedVariableLibrary, HarmonizeError> {
        Ok(match self {
            DvlSource::Dir(dir) => DvlStore::open(dir)?.load()?,
            DvlSource::Doc(path) => {
                let bytes = fs::read(path).map_err(|e| DvlError::Io(format!("{}: {e}", path.display())))?;
                DerivedVariableLibrary::import_doc(&bytes)?
            }
            DvlSource::Library(lib) => lib.clone(),
        })
    }

    fn reference(&self) -> Option<DvlRef> {
        match self {
            DvlSource::Dir(p) => Some(DvlRef {
                kind: DvlKind::Dir,
                path: p.clone(),
            }),
            DvlSource::Doc(p) => Some(DvlRef {
                kind: DvlKind::Doc,
                path: p.clone(),
            }),
            DvlSource::Library(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecodeJob {
    pub source: SourceSpec,
    pub variables: VariableSheet,
    pub details: DetailsSheet,
    pub variables_path: Option<PathBuf>,
    pub details_path: Option<PathBuf>,
    pub database: String,
    pub selected: Vec<String>,
    /// Source columns to copy; `["*"]` means all of them.
    pub passthrough: Vec<String>,
    /// Expressions for derived variables of the sheets, by name. Names not
    /// found here are looked up in `dvl`.
    pub derived_specs: Vec<DerivedVariableSpec>,
    pub dvl: Option<DvlSource>,
    /// Library entries to add as extra derived columns, or to pin the
    /// version of a selected derived variable.
    pub derive: Vec<DerivedRequest>,
    pub output: OutputSpec,
    pub options: RecodeOptions,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    /// Documentation CSV of the run's derived columns.
    pub derived_doc: Vec<u8>,
    pub plan: RecodePlan,
}

pub fn read_sheets(variables: &[u8], details: &[u8]) -> Result<(VariableSheet, DetailsSheet), HarmonizeError> {
    let vs = parse_variable_sheet(variables).map_err(|e| HarmonizeError::sheet("variable sheet", e))?;
    let ds = parse_details_sheet(details).map_err(|e| HarmonizeError::sheet("details sheet", e))?;
    Ok((vs, ds))
}

pub fn expand_passthrough(requested: &[String], source_columns: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for c in requested {
        if c == ALL_COLUMNS {
            out.extend(source_columns.iter().cloned());
        } else {
            out.push(c.clone());
        }
    }
    out
}

/// Compiles the job's plan against the given source columns.
pub fn build_plan(job: &RecodeJob, source_columns: &[String]) -> Result<RecodePlan, HarmonizeError> {
    let library = job.dvl.as_ref().map(DvlSource::load).transpose()?;
    let pinned: BTreeMap<&str, Option<usize>> = job.derive.iter().map(|r| (r.name.as_str(), r.version)).collect();

    let mut specs = job.derived_specs.clone();
    let mut provenance = BTreeMap::new();
    for name in &job.selected {
        let is_derived = job.variables.get(name).is_some_and(|e| e.is_derived());
        if !is_derived || specs.iter().any(|s| &s.name == name) {
            continue;
        }
        if let Some(lib) = &library {
            let v = lib.get(name, pinned.get(name.as_str()).copied().flatten())?;
            provenance.insert(v.content_hash.clone(), (v.author.clone(), v.created_at.clone()));
            specs.push(v.spec.clone());
        }
    }

    let passthrough = expand_passthrough(&job.passthrough, source_columns);
    let mut plan = compile_plan(
        &job.variables,
        &job.details,
        &job.database,
        &job.selected,
        &passthrough,
        &specs,
    )?;
    for d in &mut plan.derived {
        d.provenance = provenance.get(&d.content_hash).cloned();
    }

    let extra: Vec<DerivedRequest> = job
        .derive
        .iter()
        .filter(|r| !job.selected.contains(&r.name))
        .cloned()
        .collect();
    if !extra.is_empty() {
        let lib = library.as_ref().ok_or_else(|| {
            PlanError::Dvl(DvlError::UnknownName(format!(
                "{} (no derived variable library given)",
                extra[0].name
            )))
        })?;
        plan = apply_from_dvl(&plan, lib, &extra)?;
    }
    Ok(plan)
}

fn sheet_ref(path: &Option<PathBuf>, canonical: &[u8]) -> SheetRef {
    SheetRef {
        path: path.clone(),
        sha256: sha256_hex(canonical),
    }
}

pub fn run_recode(job: &RecodeJob, progress: &mut dyn FnMut(Progress)) -> Result<RunReport, HarmonizeError> {
    let started_at = crate::dvl::now_timestamp();
    let source = open_source(&job.source)?;
    let plan = build_plan(job, &source.meta.columns)?;

    if let Some(parent) = job.output.path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(IoError::from)?;
    }
    let sink = open_sink(
        job.output.format,
        &job.output.path,
        job.output.table.as_deref(),
        plan.output_columns(),
    )?;
    let stats = recode_stream(&plan, source, sink, job.options, progress)?;

    let output_hash = hash_output(job.output.format, &job.output.path, job.output.table.as_deref())?;
    let (size_bytes, source_hash) = hash_file(&job.source.location)?;
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        engine_version: ENGINE_VERSION.to_string(),
        started_at,
        finished_at: crate::dvl::now_timestamp(),
        database: job.database.clone(),
        variables: sheet_ref(&job.variables_path, &serialize_variable_sheet(&job.variables)),
        details: sheet_ref(&job.details_path, &serialize_details_sheet(&job.details)),
        source: SourceRef {
            format: job.source.format,
            path: job.source.location.clone(),
            table: job.source.table.clone(),
            size_bytes,
            sha256: source_hash,
        },
        selected: job.selected.clone(),
        passthrough: plan.passthrough.clone(),
        derived: plan
            .derived
            .iter()
            .map(|d| DerivedRef {
                name: d.spec.name.clone(),
                content_hash: d.content_hash.clone(),
                author: d.provenance.as_ref().map(|p| p.0.clone()),
                created_at: d.provenance.as_ref().map(|p| p.1.clone()),
                spec: d.spec.clone(),
            })
            .collect(),
        derive: job.derive.iter().map(ToString::to_string).collect(),
        dvl: job.dvl.as_ref().and_then(DvlSource::reference),
        chunk_size: job.source.chunk_size,
        options: job.options,
        output: OutputRef {
            format: job.output.format,
            path: job.output.path.clone(),
            table: job.output.table.clone(),
            sha256: output_hash,
        },
        stats,
    };
    Ok(RunReport {
        derived_doc: export_run_doc(&plan.derived),
        manifest,
        plan,
    })
}

/// Outcome of re-running a manifest.
#[derive(Debug, Clone)]
pub struct Replay {
    pub report: RunReport,
    pub expected_hash: String,
}

impl Replay {
    pub fn matches(&self) -> bool {
        self.report.manifest.output.sha256 == self.expected_hash
    }
}

/// Rebuilds the job a manifest describes, after checking that the recorded
/// inputs are unchanged. Derived expressions come from the manifest itself.
pub fn job_from_manifest(m: &RunManifest, output: Option<OutputSpec>) -> Result<RecodeJob, HarmonizeError> {
    if m.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(HarmonizeError::Validation(format!(
            "manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    let read = |r: &SheetRef, what: &str| -> Result<Vec<u8>, HarmonizeError> {
        let path = r
            .path
            .as_ref()
            .ok_or_else(|| HarmonizeError::Validation(format!("manifest has no {what} path")))?;
        fs::read(path).map_err(|e| HarmonizeError::Io(IoError::io(format!("{}: {e}", path.display()))))
    };
    let (vs, ds) = read_sheets(
        &read(&m.variables, "variable sheet")?,
        &read(&m.details, "details sheet")?,
    )?;
    let changed =
        |what: &str| HarmonizeError::Validation(format!("{what} differs from the one recorded in the manifest"));
    if sha256_hex(&serialize_variable_sheet(&vs)) != m.variables.sha256 {
        return Err(changed("variable sheet"));
    }
    if sha256_hex(&serialize_details_sheet(&ds)) != m.details.sha256 {
        return Err(changed("details sheet"));
    }
    let (size, hash) = hash_file(&m.source.path)?;
    if size != m.source.size_bytes || hash != m.source.sha256 {
        return Err(changed("source data"));
    }

    let mut lib = DerivedVariableLibrary::new();
    for d in &m.derived {
        if d.spec.content_hash() != d.content_hash {
            return Err(HarmonizeError::Dvl(DvlError::HashMismatch {
                name: d.name.clone(),
                recorded: d.content_hash.clone(),
                computed: d.spec.content_hash(),
            }));
        }
        lib.add_at(
            d.spec.clone(),
            d.author.as_deref().unwrap_or(""),
            d.created_at.as_deref().unwrap_or(""),
        )?;
    }
    let derive = m
        .derived
        .iter()
        .filter(|d| !m.selected.contains(&d.name))
        .map(|d| DerivedRequest::latest(d.name.clone()))
        .collect();

    let mut source = match m.source.format {
        Format::Csv => SourceSpec::csv(&m.source.path),
        Format::Sqlite => SourceSpec::sqlite(&m.source.path, m.source.table.clone().unwrap_or_default()),
    };
    source.chunk_size = m.chunk_size;
    Ok(RecodeJob {
        source,
        variables: vs,
        details: ds,
        variables_path: m.variables.path.clone(),
        details_path: m.details.path.clone(),
        database: m.database.clone(),
        selected: m.selected.clone(),
        passthrough: m.passthrough.clone(),
        derived_specs: Vec::new(),
        dvl: Some(DvlSource::Library(lib)),
        derive,
        output: output.unwrap_or_else(|| OutputSpec {
            format: m.output.format,
            path: m.output.path.clone(),
            table: m.output.table.clone(),
        }),
        options: m.options,
    })
}

pub fn replay(m: &RunManifest, output: Option<OutputSpec>) -> Result<Replay, HarmonizeError> {
    let job = job_from_manifest(m, output)?;
    let report = run_recode(&job, &mut |_| {})?;
    Ok(Replay {
        report,
        expected_hash: m.output.sha256.clone(),
    })
}
