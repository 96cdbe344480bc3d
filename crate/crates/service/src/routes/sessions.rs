use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use harmonize_core::dvl::{export_run_doc, now_timestamp, CompiledDerived, DerivedVariableSpec};
use harmonize_core::io::{open_source, Format, SourceSpec};
use harmonize_core::sheet::{
    parse_details_sheet, parse_variable_sheet, serialize_details_sheet, serialize_variable_sheet, DetailsSheet,
    SheetKind, ValidationReport, VariableSheet,
};
use harmonize_core::summarize::{summarize_variable, DEFAULT_TOP_K};

use crate::error::ApiError;
use crate::extract::ApiJson;
use crate::state::{lock, AppState, JobState, Session};

pub(crate) async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    format: Option<String>,
    location: Option<PathBuf>,
    /// Inline CSV content.
    upload: Option<String>,
    table: Option<String>,
    name: Option<String>,
    chunk_size: Option<usize>,
    /// Library directory used for this session's recodes.
    dvl: Option<PathBuf>,
}

pub async fn create(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<impl IntoResponse, ApiError> {
    let format: Format = req.format.as_deref().unwrap_or("csv").parse()?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (location, upload) = match (req.location, req.upload) {
        (Some(loc), None) => (loc, None),
        (None, Some(text)) => {
            if format != Format::Csv {
                return Err(ApiError::bad_request(
                    "uploads must be CSV; connect to SQLite files by location",
                ));
            }
            let limit = state.config().upload_limit;
            if text.len() > limit {
                return Err(ApiError::new(
                    StatusCode::PAYLOAD_TOO_LARGE,
                    "UploadTooLarge",
                    format!("upload exceeds {limit} bytes; connect to the file by location instead"),
                ));
            }
            let dir = state.0.work_dir.join("uploads");
            let path = dir.join(format!("{id}.csv"));
            std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(e.to_string()))?;
            std::fs::write(&path, text).map_err(|e| ApiError::internal(e.to_string()))?;
            (path.clone(), Some(path))
        }
        _ => return Err(ApiError::bad_request("give exactly one of `location` and `upload`")),
    };
    let mut source = match format {
        Format::Csv => SourceSpec::csv(location),
        Format::Sqlite => SourceSpec::sqlite(
            location,
            req.table
                .ok_or_else(|| ApiError::bad_request("sqlite sources need `table`"))?,
        ),
    };
    if let Some(n) = req.chunk_size {
        source.chunk_size = n;
    }
    source.dataset_name = req.name.clone();

    let spec = source.clone();
    let opened = blocking(move || Ok(open_source(&spec)?.meta)).await;
    let meta = match opened {
        Ok(m) => m,
        Err(e) => {
            if let Some(p) = upload {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
    };

    let variables = VariableSheet::default();
    let details = DetailsSheet::default();
    let mut session = Session {
        id: id.clone(),
        name: req.name,
        source,
        columns: meta.columns.clone(),
        variables,
        details,
        report: ValidationReport::default(),
        derived: Vec::new(),
        dvl: req.dvl,
        created_at: now_timestamp(),
        last_used: Instant::now(),
        active_job: None,
        last_success: None,
        upload,
    };
    session.revalidate();
    lock(&state.0.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, "opened session");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "sessionId": id, "columns": meta.columns, "rowsHint": meta.row_count_hint })),
    ))
}

pub async fn get(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(json!({
        "sessionId": s.id,
        "name": s.name,
        "source": s.source,
        "columns": s.columns,
        "createdAt": s.created_at,
        "variables": s.variables.len(),
        "detailsRows": s.details.rows.len(),
        "derived": s.derived.iter().map(|d| &d.name).collect::<Vec<_>>(),
        "activeJob": s.active_job,
        "report": s.report,
    })))
}

pub async fn delete(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let session = state.session(&id)?;
    if let Some(job) = &lock(&session).active_job {
        return Err(ApiError::conflict(
            "JobRunning",
            format!("job `{job}` is still running"),
        ));
    }
    lock(&state.0.sessions).remove(&id);
    if let Some(p) = lock(&session).upload.take() {
        let _ = std::fs::remove_file(p);
    }
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct SummaryQuery {
    k: Option<usize>,
}

pub async fn summary(
    State(state): State<AppState>,
    Path((id, column)): Path<(String, String)>,
    Query(q): Query<SummaryQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let source = lock(&session).source.clone();
    let k = q.k.unwrap_or(DEFAULT_TOP_K);
    let summary = blocking(move || Ok(summarize_variable(open_source(&source)?, &column, k)?)).await?;
    Ok(Json(summary))
}

fn which_sheet(name: &str) -> Result<SheetKind, ApiError> {
    match name {
        "variables" => Ok(SheetKind::Variables),
        "details" => Ok(SheetKind::Details),
        other => Err(ApiError::not_found("UnknownSheet", format!("no sheet `{other}`"))),
    }
}

fn csv_response(bytes: Vec<u8>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes)
}

pub async fn get_sheet(
    State(state): State<AppState>,
    Path((id, sheet)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let kind = which_sheet(&sheet)?;
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(csv_response(match kind {
        SheetKind::Variables => serialize_variable_sheet(&s.variables),
        SheetKind::Details => serialize_details_sheet(&s.details),
    }))
}

pub async fn put_sheet(
    State(state): State<AppState>,
    Path((id, sheet)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let kind = which_sheet(&sheet)?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    match kind {
        SheetKind::Variables => s.variables = parse_variable_sheet(&body).map_err(|e| ApiError::sheet(kind, &e))?,
        SheetKind::Details => s.details = parse_details_sheet(&body).map_err(|e| ApiError::sheet(kind, &e))?,
    }
    s.revalidate();
    Ok(Json(json!({
        "variables": s.variables.len(),
        "detailsRows": s.details.rows.len(),
        "report": s.report,
    })))
}

pub async fn validation(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let report = lock(&session).report.clone();
    Ok(Json(report))
}

pub async fn add_details_row(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(cells): ApiJson<BTreeMap<String, String>>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.details = s
        .details
        .with_row(&cells)
        .map_err(|e| ApiError::sheet(SheetKind::Details, &e))?;
    s.revalidate();
    let index = s.details.rows.len();
    Ok((
        StatusCode::CREATED,
        Json(json!({ "index": index, "row": s.details.rows[index - 1], "report": s.report })),
    ))
}

pub async fn add_variable_row(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(cells): ApiJson<BTreeMap<String, String>>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.variables = s
        .variables
        .with_row(&cells)
        .map_err(|e| ApiError::sheet(SheetKind::Variables, &e))?;
    s.revalidate();
    let index = s.variables.len();
    Ok((
        StatusCode::CREATED,
        Json(json!({ "index": index, "row": s.variables.entries[index - 1], "report": s.report })),
    ))
}

/// Index is 1-based; 0 removes nothing.
fn remove_at<T>(rows: &mut Vec<T>, index: usize) -> Result<Option<T>, ApiError> {
    match index {
        0 => Ok(None),
        i if i <= rows.len() => Ok(Some(rows.remove(i - 1))),
        i => Err(ApiError::not_found(
            "RowNotFound",
            format!("row {i} does not exist; the sheet has {} row(s)", rows.len()),
        )),
    }
}

pub async fn delete_details_row(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, usize)>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let removed = remove_at(&mut s.details.rows, index)?;
    s.revalidate();
    Ok(Json(
        json!({ "removed": removed, "rows": s.details.rows.len(), "report": s.report }),
    ))
}

pub async fn delete_variable_row(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, usize)>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let removed = remove_at(&mut s.variables.entries, index)?;
    s.revalidate();
    Ok(Json(
        json!({ "removed": removed, "rows": s.variables.len(), "report": s.report }),
    ))
}

pub async fn put_derived(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(spec): ApiJson<DerivedVariableSpec>,
) -> Result<impl IntoResponse, ApiError> {
    spec.compile(None)?;
    let hash = spec.content_hash();
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.derived.retain(|d| d.name != spec.name);
    let name = spec.name.clone();
    s.derived.push(spec);
    Ok((StatusCode::CREATED, Json(json!({ "name": name, "contentHash": hash }))))
}

pub async fn list_derived(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let derived = lock(&session).derived.clone();
    Ok(Json(derived))
}

fn session_doc(state: &AppState, s: &Session) -> Result<Vec<u8>, ApiError> {
    if let Some(job) = s.last_success.as_ref().and_then(|j| state.job(j).ok()) {
        if let JobState::Succeeded(report) = &*lock(&job.state) {
            return Ok(report.derived_doc.clone());
        }
    }
    let compiled: Vec<CompiledDerived> = s.derived.iter().map(|d| d.compiled(None)).collect::<Result<_, _>>()?;
    Ok(export_run_doc(&compiled))
}

/// Documentation CSV of the last successful recode's derived columns, or of
/// the session's working expressions before any recode.
pub async fn derived_doc(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(csv_response(session_doc(&state, &s)?))
}

#[derive(Debug, Deserialize)]
pub struct PersistRequest {
    dir: PathBuf,
}

pub async fn persist(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<PersistRequest>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let (vars, details, doc) = {
        let s = lock(&session);
        (
            serialize_variable_sheet(&s.variables),
            serialize_details_sheet(&s.details),
            session_doc(&state, &s)?,
        )
    };
    let dir = req.dir;
    blocking(move || {
        let io = |e: std::io::Error| ApiError::internal(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(&dir).map_err(io)?;
        let files = [("variables.csv", vars), ("details.csv", details), ("derived.csv", doc)];
        let mut written = serde_json::Map::new();
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io)?;
            written.insert(name.trim_end_matches(".csv").to_string(), json!(path));
        }
        Ok(Json(Value::Object(written)))
    })
    .await
}
