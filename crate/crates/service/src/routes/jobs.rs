use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use harmonize_core::io::Format;
use harmonize_core::pipeline::{build_plan, run_recode, DvlSource, OutputSpec, RecodeJob};
use harmonize_core::recode::{DerivedRequest, RecodeOptions};
use harmonize_core::ExecMode;

use super::sessions::blocking;
use crate::error::ApiError;
use crate::extract::ApiJson;
use crate::state::{lock, AppState, Job, JobState};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecodeRequest {
    database: Option<String>,
    selected: Vec<String>,
    #[serde(default)]
    passthrough: Vec<String>,
    output_format: Option<String>,
    table: Option<String>,
    chunk_size: Option<usize>,
    /// Library entries to add as derived columns, `name` or `name@version`.
    #[serde(default)]
    dvl_names: Vec<String>,
    #[serde(default)]
    strict_unmatched: bool,
    mode: Option<ExecMode>,
}

pub async fn start(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<RecodeRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let format: Format = req.output_format.as_deref().unwrap_or("csv").parse()?;
    let derive = req
        .dvl_names
        .iter()
        .map(|s| s.parse::<DerivedRequest>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(ApiError::bad_request)?;
    let session = state.session(&id)?;
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    let out_dir = state.0.work_dir.join("jobs").join(&job_id);
    let (job, columns) = {
        let s = lock(&session);
        if let Some(running) = &s.active_job {
            return Err(ApiError::conflict(
                "JobRunning",
                format!("session already has job `{running}` running"),
            ));
        }
        let database = match req.database {
            Some(db) => db,
            None => {
                let mut dbs: Vec<&str> = s.details.databases().collect();
                dbs.sort_unstable();
                dbs.dedup();
                match dbs.as_slice() {
                    [one] => one.to_string(),
                    _ => {
                        return Err(ApiError::bad_request(
                            "the sheets name several databases; give `database`",
                        ))
                    }
                }
            }
        };
        let dvl = match &s.dvl {
            Some(dir) => DvlSource::Dir(dir.clone()),
            None => lock(&state.0.library).source(),
        };
        let mut source = s.source.clone();
        if let Some(n) = req.chunk_size {
            source.chunk_size = n;
        }
        let (file, table) = match format {
            Format::Csv => ("recoded.csv", None),
            Format::Sqlite => ("recoded.sqlite", Some(req.table.unwrap_or_else(|| "recoded".into()))),
        };
        let job = RecodeJob {
            source,
            variables: s.variables.clone(),
            details: s.details.clone(),
            variables_path: None,
            details_path: None,
            database,
            selected: req.selected,
            passthrough: req.passthrough,
            derived_specs: s.derived.clone(),
            dvl: Some(dvl),
            derive,
            output: OutputSpec {
                format,
                path: out_dir.join(file),
                table,
            },
            options: RecodeOptions {
                mode: req.mode.unwrap_or_default(),
                strict_unmatched: req.strict_unmatched,
            },
        };
        (job, s.columns.clone())
    };

    // reject bad plans before queueing
    let checked = job.clone();
    blocking(move || build_plan(&checked, &columns).map(drop).map_err(ApiError::from)).await?;

    let handle = Arc::new(Job::new(job_id.clone(), id.clone()));
    {
        let mut s = lock(&session);
        if let Some(running) = &s.active_job {
            return Err(ApiError::conflict(
                "JobRunning",
                format!("session already has job `{running}` running"),
            ));
        }
        s.active_job = Some(job_id.clone());
    }
    lock(&state.0.jobs).insert(job_id.clone(), handle.clone());
    tracing::info!(session = %id, job = %job_id, "queued recode");

    tokio::task::spawn_blocking(move || {
        *lock(&handle.state) = JobState::Running;
        let result = catch_unwind(AssertUnwindSafe(|| {
            run_recode(&job, &mut |p| {
                handle.rows_done.store(p.rows_done, Ordering::Relaxed);
                if let Some(t) = p.rows_total {
                    handle.rows_total.store(t, Ordering::Relaxed);
                }
            })
        }));
        let outcome = match result {
            Ok(Ok(report)) => JobState::Succeeded(Box::new(report)),
            Ok(Err(e)) => JobState::Failed(e.into()),
            Err(_) => JobState::Failed(ApiError::internal("recode worker panicked")),
        };
        let mut s = lock(&session);
        s.active_job = None;
        if matches!(outcome, JobState::Succeeded(_)) {
            s.last_success = Some(handle.id.clone());
        }
        tracing::info!(job = %handle.id, state = outcome.name(), "recode finished");
        *lock(&handle.state) = outcome;
    });

    Ok((StatusCode::ACCEPTED, Json(json!({ "jobId": job_id }))))
}

pub async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let job = state.job(&id)?;
    let (done, total) = job.progress();
    let st = lock(&job.state);
    let mut body = json!({
        "jobId": job.id,
        "sessionId": job.session,
        "state": st.name(),
        "progress": { "rowsDone": done, "rowsTotal": total },
    });
    match &*st {
        JobState::Succeeded(report) => {
            body["stats"] = json!(report.manifest.stats);
            body["output"] = json!({
                "format": report.manifest.output.format,
                "sha256": report.manifest.output.sha256,
                "columns": report.plan.output_columns(),
            });
        }
        JobState::Failed(e) => body["error"] = json!(e.body),
        _ => {}
    }
    Ok(Json(body))
}

fn finished(job: &Job) -> Result<Box<harmonize_core::pipeline::RunReport>, ApiError> {
    match &*lock(&job.state) {
        JobState::Succeeded(report) => Ok(report.clone()),
        JobState::Failed(e) => Err(ApiError::conflict(
            "JobFailed",
            format!("job `{}` failed: {}", job.id, e.body.message),
        )),
        other => Err(ApiError::conflict(
            "JobNotFinished",
            format!("job `{}` is {}", job.id, other.name()),
        )),
    }
}

pub async fn result(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let report = finished(&*state.job(&id)?)?;
    let output = report.manifest.output.clone();
    let bytes = blocking(move || std::fs::read(&output.path).map_err(|e| ApiError::internal(e.to_string()))).await?;
    let (content_type, name) = match report.manifest.output.format {
        Format::Csv => ("text/csv; charset=utf-8", "recoded.csv"),
        Format::Sqlite => ("application/vnd.sqlite3", "recoded.sqlite"),
    };
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\"")),
        ],
        bytes,
    ))
}

pub async fn manifest(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let report = finished(&*state.job(&id)?)?;
    Ok(Json(report.manifest))
}
