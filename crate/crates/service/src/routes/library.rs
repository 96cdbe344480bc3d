use std::collections::BTreeMap;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use harmonize_core::dvl::DerivedVariableSpec;
use harmonize_core::expr::{infer, parse_expression};
use harmonize_core::VariableType;

use super::sessions::blocking;
use crate::error::ApiError;
use crate::extract::ApiJson;
use crate::state::{lock, AppState, Library};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddRequest {
    spec: DerivedVariableSpec,
    #[serde(default)]
    author: Option<String>,
}

pub async fn add(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<AddRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let author = req.author.unwrap_or_else(|| "api".to_string());
    let outcome = blocking(move || {
        // one writer at a time
        let mut lib = lock(&state.0.library);
        Ok(match &mut *lib {
            Library::Store(store) => store.add(req.spec, &author)?,
            Library::Memory(mem) => mem.add(req.spec, &author)?,
        })
    })
    .await?;
    let status = if outcome.duplicate {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(outcome)))
}

pub async fn list(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let lib = blocking(move || lock(&state.0.library).snapshot()).await?;
    Ok(Json(lib.list()))
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    version: Option<usize>,
}

/// All versions of `name`, or one with `?version=N`.
pub async fn show(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<VersionQuery>,
) -> Result<Json<Value>, ApiError> {
    let lib = blocking(move || lock(&state.0.library).snapshot()).await?;
    if let Some(v) = q.version {
        return Ok(Json(json!(lib.get(&name, Some(v))?)));
    }
    let versions = lib
        .versions(&name)
        .ok_or_else(|| ApiError::not_found("UnknownDerived", format!("no derived variable named `{name}`")))?;
    Ok(Json(json!({ "name": name, "versions": versions })))
}

pub async fn export(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let lib = blocking(move || lock(&state.0.library).snapshot()).await?;
    Ok((
        [(axum::http::header::CONTENT_TYPE, "text/csv; charset=utf-8")],
        lib.export_doc(),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParseRequest {
    source: String,
    #[serde(default)]
    components: BTreeMap<String, VariableType>,
}

/// Parse feedback for expression editors. Always 200; problems are reported
/// in the body.
pub async fn parse(ApiJson(req): ApiJson<ParseRequest>) -> Json<Value> {
    let expr = match parse_expression(&req.source) {
        Ok(e) => e,
        Err(e) => {
            return Json(json!({
                "ok": false,
                "error": { "kind": "syntax", "message": e.message, "position": e.position },
            }))
        }
    };
    let identifiers: Vec<&str> = expr.idents().into_iter().collect();
    let mut body = json!({
        "ok": true,
        "normalized": expr.to_string(),
        "identifiers": identifiers,
    });
    if !req.components.is_empty() {
        match infer(&expr, &req.components) {
            Ok(t) => {
                body["type"] = json!(t.to_string());
                body["outputType"] = json!(t.output_type());
            }
            Err(e) => {
                body["ok"] = json!(false);
                body["error"] = json!({ "kind": "type", "message": e.to_string() });
            }
        }
    }
    Json(body)
}
