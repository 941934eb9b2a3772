use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use evsite_core::coupled::CoupledError;
use evsite_core::Violation;

/// Failure to bring a scenario into service.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("scenario has {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.message.as_str()).unwrap_or(""))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Coupled(#[from] CoupledError),
    #[error("cache: {0}")]
    Cache(String),
}

/// JSON error body `{"error": {"code", "message"}}` with an HTTP status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}
