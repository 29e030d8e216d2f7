use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use elicit_core::aggregate::AggregateError;
use elicit_core::elicitation::ElicitError;
use elicit_core::store::StoreError;

/// Error body: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id:?}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<ElicitError> for ApiError {
    fn from(e: ElicitError) -> Self {
        let (status, code) = match &e {
            ElicitError::InvalidConfig(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
            ElicitError::InvalidLabel(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_label"),
            ElicitError::UnsupportedMode(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unsupported_mode"),
            ElicitError::OutstandingQuery(_) => (StatusCode::CONFLICT, "outstanding_query"),
            ElicitError::SessionComplete => (StatusCode::CONFLICT, "session_complete"),
            ElicitError::UnknownQuery(_) => (StatusCode::CONFLICT, "stale_query"),
            ElicitError::DuplicateAnswer(_) => (StatusCode::CONFLICT, "duplicate_answer"),
            ElicitError::ReplayMismatch(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_log"),
            ElicitError::Degenerate(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate"),
            ElicitError::Gp(_) | ElicitError::Sim(_) => (StatusCode::INTERNAL_SERVER_ERROR, "numeric"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Replay(inner) => {
                let mut err = ApiError::from(inner);
                err.code = "corrupt_log";
                err.status = StatusCode::INTERNAL_SERVER_ERROR;
                err
            }
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", other.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
    }
}

impl From<AggregateError> for ApiError {
    fn from(e: AggregateError) -> Self {
        let code = match e {
            AggregateError::Empty => "invalid_request",
            AggregateError::GridMismatch => "grid_mismatch",
            AggregateError::Degenerate => "degenerate",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}
