use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "harmonize", version, about = "Sheet-driven recoding of tabular data")]
pub struct Cli {
    /// TOML file with defaults for `recode` and `serve`; flags take precedence.
    #[arg(long, global = true, env = "HARMONIZE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Check a variable sheet and a details sheet.
    Validate(ValidateArgs),
    /// Describe source columns.
    Summarize(SummarizeArgs),
    /// Count missing cells in a source.
    Missing(MissingArgs),
    /// Apply the sheets to a source and write the harmonized table.
    Recode(RecodeArgs),
    /// Re-run a recode from its manifest and compare output hashes.
    Replay(ReplayArgs),
    /// Manage a derived-variable library directory.
    #[command(subcommand)]
    Dvl(DvlCommand),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Parallel,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// csv or sqlite.
    #[arg(long, default_value = "csv")]
    pub format: String,
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub variables: PathBuf,
    #[arg(long)]
    pub details: PathBuf,
    #[arg(long)]
    pub json: bool,
    /// Also write both sheets in canonical form to this directory.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Column to describe; repeat for several. All columns when omitted.
    #[arg(long)]
    pub column: Vec<String>,
    #[arg(long, default_value_t = harmonize_core::summarize::DEFAULT_TOP_K)]
    pub top: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MissingArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub json: bool,
}

/// Every field is optional here so that a config file can supply it.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RecodeArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Source format: csv or sqlite.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub variables: Option<PathBuf>,
    #[arg(long)]
    pub details: Option<PathBuf>,
    #[arg(long)]
    pub database: Option<String>,
    /// Comma-separated harmonized variables to produce.
    #[arg(long, value_delimiter = ',')]
    pub select: Vec<String>,
    /// Comma-separated source columns to copy unchanged; `*` for all.
    #[arg(long, value_delimiter = ',')]
    pub passthrough: Vec<String>,
    /// JSON file with a derived-variable spec; repeatable.
    #[arg(long)]
    pub derived_spec: Vec<PathBuf>,
    /// Derived-variable library directory.
    #[arg(long, conflicts_with = "dvl_doc")]
    pub dvl: Option<PathBuf>,
    /// Derived-variable documentation CSV to read expressions from.
    #[arg(long)]
    pub dvl_doc: Option<PathBuf>,
    /// Comma-separated library entries, `name` or `name@version`.
    #[arg(long, value_delimiter = ',')]
    pub derive: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the extension of --out when omitted.
    #[arg(long)]
    pub out_format: Option<String>,
    #[arg(long)]
    pub out_table: Option<String>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Fail on values that match no rule instead of writing NA(b).
    #[arg(long)]
    pub strict_unmatched: bool,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write the canonical sheets, derived documentation and manifest here.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the reproduced output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DvlCommand {
    /// Add a spec (JSON file) as a new version.
    Add {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, env = "USER", default_value = "unknown")]
        author: String,
    },
    List {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the versions of one entry as JSON.
    Show {
        #[arg(long)]
        dir: PathBuf,
        name: String,
        #[arg(long)]
        version: Option<usize>,
    },
    /// Write the documentation CSV of every version.
    Export {
        #[arg(long)]
        dir: PathBuf,
        /// Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge a documentation CSV into the library.
    Import {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        doc: PathBuf,
    },
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ServeArgs {
    #[arg(long, env = "HARMONIZE_HOST")]
    pub host: Option<String>,
    #[arg(long, env = "HARMONIZE_PORT")]
    pub port: Option<u16>,
    /// Directory for uploads and job outputs.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    /// Shared derived-variable library directory.
    #[arg(long)]
    pub dvl: Option<PathBuf>,
    #[arg(long)]
    pub session_ttl_secs: Option<u64>,
    #[arg(long)]
    pub upload_limit: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub recode: RecodeArgs,
    pub serve: ServeArgs,
}

fn rebase(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl ConfigFile {
    pub fn parse(text: &str, dir: &Path) -> Result<ConfigFile, toml::de::Error> {
        let mut cfg: ConfigFile = toml::from_str(text)?;
        // paths in the file are relative to the file
        let r = &mut cfg.recode;
        for p in [
            &mut r.source,
            &mut r.variables,
            &mut r.details,
            &mut r.dvl,
            &mut r.dvl_doc,
            &mut r.out,
            &mut r.manifest,
            &mut r.export_dir,
        ] {
            *p = rebase(dir, p.take());
        }
        r.derived_spec = r.derived_spec.drain(..).map(|p| dir.join(p)).collect();
        cfg.serve.work_dir = rebase(dir, cfg.serve.work_dir.take());
        cfg.serve.dvl = rebase(dir, cfg.serve.dvl.take());
        Ok(cfg)
    }
}

fn or_vec(a: Vec<String>, b: Vec<String>) -> Vec<String> {
    if a.is_empty() {
        b
    } else {
        a
    }
}

impl RecodeArgs {
    /// Flags win; the file fills what the flags leave unset.
    pub fn merged(self, file: RecodeArgs) -> RecodeArgs {
        let flag_library = self.dvl.is_some() || self.dvl_doc.is_some();
        RecodeArgs {
            source: self.source.or(file.source),
            format: self.format.or(file.format),
            table: self.table.or(file.table),
            variables: self.variables.or(file.variables),
            details: self.details.or(file.details),
            database: self.database.or(file.database),
            select: or_vec(self.select, file.select),
            passthrough: or_vec(self.passthrough, file.passthrough),
            derived_spec: if self.derived_spec.is_empty() {
                file.derived_spec
            } else {
                self.derived_spec
            },
            dvl: if flag_library { self.dvl } else { file.dvl },
            dvl_doc: if flag_library { self.dvl_doc } else { file.dvl_doc },
            derive: or_vec(self.derive, file.derive),
            out: self.out.or(file.out),
            out_format: self.out_format.or(file.out_format),
            out_table: self.out_table.or(file.out_table),
            chunk_size: self.chunk_size.or(file.chunk_size),
            mode: self.mode.or(file.mode),
            strict_unmatched: self.strict_unmatched || file.strict_unmatched,
            manifest: self.manifest.or(file.manifest),
            export_dir: self.export_dir.or(file.export_dir),
        }
    }
}

impl ServeArgs {
    pub fn merged(self, file: ServeArgs) -> ServeArgs {
        ServeArgs {
            host: self.host.or(file.host),
            port: self.port.or(file.port),
            work_dir: self.work_dir.or(file.work_dir),
            dvl: self.dvl.or(file.dvl),
            session_ttl_secs: self.session_ttl_secs.or(file.session_ttl_secs),
            upload_limit: self.upload_limit.or(file.upload_limit),
        }
    }
}
