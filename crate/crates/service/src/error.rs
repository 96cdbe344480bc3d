use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use harmonize_core::dvl::DvlError;
use harmonize_core::io::IoError;
use harmonize_core::recode::PlanError;
use harmonize_core::sheet::{SheetError, SheetKind};
use harmonize_core::summarize::SummaryError;
use harmonize_core::HarmonizeError;

/// JSON error body: `{code, message, location?}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                location: None,
            },
        }
    }

    pub fn with_location(mut self, location: Value) -> Self {
        self.body.location = Some(location);
        self
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    /// A sheet that failed to parse, located in `sheet`.
    pub fn sheet(sheet: SheetKind, e: &SheetError) -> Self {
        let (row, column) = match e {
            SheetError::Csv(_) => (None, None),
            SheetError::MissingColumn(c) => (None, Some(c.clone())),
            SheetError::DuplicateVariable { rows, .. } => (rows.last().copied(), Some("variable".to_string())),
            SheetError::BadType { row, column, .. } | SheetError::BadField { row, column, .. } => {
                (Some(*row), Some(column.clone()))
            }
            SheetError::UnparseableRule { row, .. } => (Some(*row), Some("recStart".to_string())),
            SheetError::InconsistentTypes { row, .. } => (Some(*row), None),
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SheetParse", e.to_string())
            .with_location(json!({ "sheet": sheet, "row": row, "column": column }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<IoError> for ApiError {
    fn from(e: IoError) -> Self {
        let (status, code) = match &e {
            IoError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            IoError::UnknownTable(_) => (StatusCode::NOT_FOUND, "UnknownTable"),
            IoError::BadFormat(_) | IoError::ColumnMismatch { .. } => (StatusCode::BAD_REQUEST, "BadFormat"),
            IoError::UnsupportedFormat(_) => (StatusCode::BAD_REQUEST, "UnsupportedFormat"),
            IoError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "Io"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<DvlError> for ApiError {
    fn from(e: DvlError) -> Self {
        let msg = e.to_string();
        match e {
            DvlError::UnknownName(_) | DvlError::UnknownVersion { .. } => ApiError::not_found("UnknownDerived", msg),
            DvlError::Syntax { source, .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Syntax", msg)
                .with_location(json!({ "offset": source.position })),
            DvlError::Io(_) => ApiError::internal(msg),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidDerived", msg),
        }
    }
}

impl From<HarmonizeError> for ApiError {
    fn from(e: HarmonizeError) -> Self {
        match e {
            HarmonizeError::Sheet {
                ref context,
                ref source,
            } => {
                let kind = if context.contains("details") {
                    SheetKind::Details
                } else {
                    SheetKind::Variables
                };
                ApiError::sheet(kind, source)
            }
            HarmonizeError::Validation(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Validation", m),
            HarmonizeError::Io(e) => e.into(),
            HarmonizeError::Dvl(e) | HarmonizeError::Plan(PlanError::Dvl(e)) => e.into(),
            HarmonizeError::Plan(p @ PlanError::InvalidSheets { .. }) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidSheets", p.to_string())
            }
            HarmonizeError::Plan(p) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "Plan", p.to_string()),
            HarmonizeError::Internal(m) => ApiError::internal(m),
        }
    }
}

impl From<SummaryError> for ApiError {
    fn from(e: SummaryError) -> Self {
        match e {
            SummaryError::UnknownColumn(_) => ApiError::not_found("UnknownColumn", e.to_string()),
            SummaryError::Io(e) => e.into(),
        }
    }
}
