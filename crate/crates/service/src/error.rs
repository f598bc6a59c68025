use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }

    pub fn invalid_spec(e: sem_core::Error) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_spec", e.to_string())
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn not_found(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
    }

    pub fn duplicate(id: &str) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, "duplicate_id", format!("session `{id}` already exists"))
    }

    pub fn terminated(id: &str) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, "session_terminated", format!("session `{id}` has terminated"))
    }

    pub fn nothing_pending(id: &str) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, "nothing_pending", format!("session `{id}` has no pending arrivals"))
    }

    pub fn unauthorized() -> ApiError {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn from_core(e: sem_core::Error) -> ApiError {
        match e {
            sem_core::Error::NoConvergence(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_convergence", e.to_string()),
            sem_core::Error::Invalid { .. } | sem_core::Error::Parse(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { code: self.code.to_string(), message: self.message } };
        (self.status, Json(body)).into_response()
    }
}
