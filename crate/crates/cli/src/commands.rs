use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use harmonize_core::dvl::{DerivedVariableSpec, DvlError, DvlStore};
use harmonize_core::io::{count_missing, open_source, Format, IoError, SourceSpec};
use harmonize_core::manifest::RunManifest;
use harmonize_core::pipeline::{job_from_manifest, read_sheets, run_recode, DvlSource, OutputSpec, RecodeJob};
use harmonize_core::recode::{DerivedRequest, RecodeOptions};
use harmonize_core::sheet::{serialize_details_sheet, serialize_variable_sheet, validate_sheets};
use harmonize_core::summarize::{summarize_variable, VariableSummary};
use harmonize_core::{ExecMode, HarmonizeError};
use harmonize_service::ServiceConfig;

use crate::args::{
    Cli, Command, ConfigFile, DvlCommand, MissingArgs, Mode, RecodeArgs, ReplayArgs, ServeArgs, SourceArgs,
    SummarizeArgs, ValidateArgs,
};

type Outcome = Result<ExitCode, HarmonizeError>;

fn usage(msg: impl Into<String>) -> HarmonizeError {
    HarmonizeError::Validation(msg.into())
}

fn io_err(path: &Path, e: io::Error) -> HarmonizeError {
    HarmonizeError::Io(match e.kind() {
        io::ErrorKind::NotFound => IoError::NotFound(path.display().to_string()),
        _ => IoError::Io {
            row: None,
            message: format!("{}: {e}", path.display()),
        },
    })
}

fn read(path: &Path) -> Result<Vec<u8>, HarmonizeError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarmonizeError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Absolute form of `p` when it exists, so manifests stay usable from
/// another working directory.
fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, HarmonizeError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = String::from_utf8(read(path)?).map_err(|_| usage(format!("{}: not UTF-8", path.display())))?;
    let dir = absolute(path).parent().map(Path::to_path_buf).unwrap_or_default();
    ConfigFile::parse(&text, &dir).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Outcome {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Summarize(a) => summarize(a),
        Command::Missing(a) => missing(a),
        Command::Recode(a) => recode(a.merged(config.recode)),
        Command::Replay(a) => replay(a),
        Command::Dvl(c) => dvl(c),
        Command::Serve(a) => serve(a.merged(config.serve)),
    }
}

fn source_spec(
    format: &str,
    location: &Path,
    table: Option<String>,
    chunk: Option<usize>,
) -> Result<SourceSpec, HarmonizeError> {
    let location = absolute(location);
    let mut spec = match format.parse::<Format>()? {
        Format::Csv => SourceSpec::csv(location),
        Format::Sqlite => SourceSpec::sqlite(location, table.ok_or_else(|| usage("sqlite sources need --table"))?),
    };
    if let Some(n) = chunk {
        spec.chunk_size = n;
    }
    Ok(spec)
}

fn source_of(a: &SourceArgs) -> Result<SourceSpec, HarmonizeError> {
    source_spec(&a.format, &a.source, a.table.clone(), a.chunk_size)
}

fn validate(a: ValidateArgs) -> Outcome {
    let (vs, ds) = read_sheets(&read(&a.variables)?, &read(&a.details)?)?;
    let report = validate_sheets(&vs, &ds);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else if report.errors.is_empty() {
        println!("ok: {} variable(s), {} details row(s)", vs.len(), ds.rows.len());
    } else {
        print!("{report}");
    }
    if let Some(dir) = &a.export_dir {
        write(&dir.join("variables.csv"), &serialize_variable_sheet(&vs))?;
        write(&dir.join("details.csv"), &serialize_details_sheet(&ds))?;
    }
    Ok(if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_summary(s: &VariableSummary) {
    println!(
        "{}: {:?}, {} rows, {} missing, {} distinct",
        s.name, s.sniffed_type, s.n_rows, s.n_missing, s.distinct_count
    );
    if let Some(n) = &s.numeric {
        println!(
            "  min {}  max {}  mean {:.4}  median {}",
            n.min, n.max, n.mean, n.median
        );
    }
    for c in &s.top_categories {
        println!("  {:>8}  {}", c.count, c.value);
    }
}

fn summarize(a: SummarizeArgs) -> Outcome {
    let spec = source_of(&a.source)?;
    let columns = if a.column.is_empty() {
        open_source(&spec)?.meta.columns
    } else {
        a.column.clone()
    };
    let mut out = Vec::with_capacity(columns.len());
    for c in &columns {
        out.push(summarize_variable(open_source(&spec)?, c, a.top)?);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out).expect("summary serializes"));
    } else {
        out.iter().for_each(print_summary);
    }
    Ok(ExitCode::SUCCESS)
}

fn missing(a: MissingArgs) -> Outcome {
    let m = count_missing(open_source(&source_of(&a.source)?)?, ExecMode::default())?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&m).expect("count serializes"));
    } else {
        println!(
            "{} missing of {} cells ({} rows x {} columns) = {:.2}%",
            m.missing,
            m.cells,
            m.rows,
            m.columns,
            m.fraction * 100.0
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn output_format(out: &Path, explicit: Option<&str>) -> Result<Format, HarmonizeError> {
    if let Some(f) = explicit {
        return Ok(f.parse()?);
    }
    let ext = out
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    Ok(match ext.as_str() {
        "db" | "sqlite" | "sqlite3" => Format::Sqlite,
        _ => Format::Csv,
    })
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn recode(a: RecodeArgs) -> Outcome {
    let need = |v: Option<PathBuf>, flag: &str| v.ok_or_else(|| usage(format!("recode needs --{flag}")));
    let source_path = need(a.source, "source")?;
    let variables_path = absolute(&need(a.variables, "variables")?);
    let details_path = absolute(&need(a.details, "details")?);
    let out = need(a.out, "out")?;
    let database = a.database.ok_or_else(|| usage("recode needs --database"))?;
    if a.select.is_empty() {
        return Err(usage("recode needs --select"));
    }
    let source = source_spec(
        a.format.as_deref().unwrap_or("csv"),
        &source_path,
        a.table,
        a.chunk_size,
    )?;
    let (variables, details) = read_sheets(&read(&variables_path)?, &read(&details_path)?)?;

    let mut derived_specs = Vec::new();
    for p in &a.derived_spec {
        let spec: DerivedVariableSpec = serde_json::from_slice(&read(p)?)
            .map_err(|e| HarmonizeError::Dvl(DvlError::InvalidSpec(format!("{}: {e}", p.display()))))?;
        derived_specs.push(spec);
    }
    let dvl = match (a.dvl, a.dvl_doc) {
        (Some(dir), _) => Some(DvlSource::Dir(absolute(&dir))),
        (None, Some(doc)) => Some(DvlSource::Doc(absolute(&doc))),
        (None, None) => None,
    };
    let derive = a
        .derive
        .iter()
        .map(|s| s.parse::<DerivedRequest>().map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    let format = output_format(&out, a.out_format.as_deref())?;
    let table = match format {
        Format::Csv => None,
        Format::Sqlite => Some(a.out_table.unwrap_or_else(|| "recoded".into())),
    };
    let mode = match a.mode {
        Some(Mode::Sequential) => ExecMode::Sequential,
        Some(Mode::Parallel) => ExecMode::Parallel,
        None => ExecMode::default(),
    };
    let job = RecodeJob {
        source,
        variables,
        details,
        variables_path: Some(variables_path),
        details_path: Some(details_path),
        database,
        selected: a.select,
        passthrough: a.passthrough,
        derived_specs,
        dvl,
        derive,
        output: OutputSpec {
            format,
            path: absolute_output(&out),
            table,
        },
        options: RecodeOptions {
            mode,
            strict_unmatched: a.strict_unmatched,
        },
    };
    let report = run_recode(&job, &mut |_| {})?;
    let manifest_json = report.manifest.to_json();
    let manifest_path = a.manifest.unwrap_or_else(|| manifest_path_for(&out));
    write(&manifest_path, manifest_json.as_bytes())?;
    if let Some(dir) = &a.export_dir {
        write(&dir.join("variables.csv"), &serialize_variable_sheet(&job.variables))?;
        write(&dir.join("details.csv"), &serialize_details_sheet(&job.details))?;
        write(&dir.join("derived.csv"), &report.derived_doc)?;
        write(&dir.join("manifest.json"), manifest_json.as_bytes())?;
    }

    let stats = &report.manifest.stats;
    println!(
        "recoded {} rows into {} ({} columns), sha256 {}",
        stats.rows_out,
        out.display(),
        report.plan.output_columns().len(),
        report.manifest.output.sha256
    );
    for (column, n) in &stats.unmatched {
        eprintln!("warning: {n} value(s) of `{column}` matched no rule and became NA(b)");
    }
    println!("manifest: {}", manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

/// The output file does not exist yet; anchor its directory instead.
fn absolute_output(out: &Path) -> PathBuf {
    match (out.parent(), out.file_name()) {
        (Some(parent), Some(name)) if !parent.as_os_str().is_empty() => {
            let _ = fs::create_dir_all(parent);
            absolute(parent).join(name)
        }
        _ => std::env::current_dir()
            .map(|d| d.join(out))
            .unwrap_or_else(|_| out.to_path_buf()),
    }
}

fn replay(a: ReplayArgs) -> Outcome {
    let text = String::from_utf8(read(&a.manifest)?).map_err(|_| usage("manifest is not UTF-8"))?;
    let m = RunManifest::from_json(&text).map_err(|e| usage(format!("{}: {e}", a.manifest.display())))?;
    let output = OutputSpec {
        format: m.output.format,
        path: absolute_output(&a.out),
        table: m.output.table.clone(),
    };
    let job = job_from_manifest(&m, Some(output))?;
    let report = run_recode(&job, &mut |_| {})?;
    let got = &report.manifest.output.sha256;
    if *got == m.output.sha256 {
        println!("reproduced: output sha256 {got} matches the manifest");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("MISMATCH: output sha256 {got}, manifest records {}", m.output.sha256);
        Ok(ExitCode::from(1))
    }
}

fn dvl(c: DvlCommand) -> Outcome {
    match c {
        DvlCommand::Add { dir, spec, author } => {
            let spec: DerivedVariableSpec = serde_json::from_slice(&read(&spec)?)
                .map_err(|e| HarmonizeError::Dvl(DvlError::InvalidSpec(format!("{}: {e}", spec.display()))))?;
            let name = spec.name.clone();
            let o = DvlStore::open(&dir)?.add(spec, &author)?;
            if o.duplicate {
                println!(
                    "{name}: identical to version {} ({}), nothing added",
                    o.version, o.content_hash
                );
            } else {
                println!("{name}: added version {} ({})", o.version, o.content_hash);
            }
        }
        DvlCommand::List { dir, json } => {
            let list = DvlStore::open(&dir)?.load()?.list();
            if json {
                println!("{}", serde_json::to_string_pretty(&list).expect("catalog serializes"));
            } else {
                for e in list {
                    println!(
                        "{}\t{} version(s)\t{}\t[{}]\t{}",
                        e.name,
                        e.versions,
                        e.output_type,
                        e.components.join(", "),
                        e.latest_hash
                    );
                }
            }
        }
        DvlCommand::Show { dir, name, version } => {
            let lib = DvlStore::open(&dir)?.load()?;
            let text = match version {
                Some(_) => serde_json::to_string_pretty(lib.get(&name, version)?),
                None => serde_json::to_string_pretty(
                    lib.versions(&name).ok_or_else(|| DvlError::UnknownName(name.clone()))?,
                ),
            };
            println!("{}", text.expect("versions serialize"));
        }
        DvlCommand::Export { dir, out } => {
            let doc = DvlStore::open(&dir)?.load()?.export_doc();
            match out {
                Some(path) => write(&path, &doc)?,
                None => io::stdout()
                    .write_all(&doc)
                    .map_err(|e| io_err(Path::new("<stdout>"), e))?,
            }
        }
        DvlCommand::Import { dir, doc } => {
            let outcomes = DvlStore::open(&dir)?.import_doc(&read(&doc)?)?;
            let added = outcomes.iter().filter(|o| !o.duplicate).count();
            println!("imported {} entr(ies), {added} new", outcomes.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(a: ServeArgs) -> Outcome {
    let host = a.host.unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.unwrap_or(8080);
    let mut config = ServiceConfig {
        work_dir: a.work_dir,
        dvl_dir: a.dvl,
        ..ServiceConfig::default()
    };
    if let Some(s) = a.session_ttl_secs {
        config.session_ttl = Duration::from_secs(s);
    }
    if let Some(n) = a.upload_limit {
        config.upload_limit = n;
    }
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .or_else(|_| {
            use std::net::ToSocketAddrs;
            (host.as_str(), port)
                .to_socket_addrs()
                .ok()
                .and_then(|mut it| it.next())
                .ok_or(())
        })
        .map_err(|_| usage(format!("cannot resolve {host}:{port}")))?;

    let rt = tokio::runtime::Runtime::new().map_err(|e| HarmonizeError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let state = harmonize_service::AppState::new(config).map_err(|e| HarmonizeError::Internal(e.body.message))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| io_err(Path::new(&addr.to_string()), e))?;
        let local = listener
            .local_addr()
            .map_err(|e| HarmonizeError::Internal(e.to_string()))?;
        println!("listening on http://{local}");
        let _ = io::stdout().flush();
        harmonize_service::serve_on(listener, state)
            .await
            .map_err(|e| HarmonizeError::Internal(e.to_string()))
    })?;
    Ok(ExitCode::SUCCESS)
}
