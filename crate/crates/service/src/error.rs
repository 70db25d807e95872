use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use zealot_core::Error;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what}"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::OutOfTurn(_) | Error::GameOver | Error::NoLegalMoves => StatusCode::CONFLICT,
            Error::IllegalMove(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::InvalidGraph(_)
            | Error::Parse { .. }
            | Error::InvalidParams(_)
            | Error::NotStronglyConnected
            | Error::InvalidZealots(_)
            | Error::Budget { .. }
            | Error::InvalidPotential(_)
            | Error::Directed
            | Error::UnstableStep { .. }
            | Error::CombinatorialCap { .. }
            | Error::NotAutomorphism(_) => StatusCode::BAD_REQUEST,
            Error::Singular(_) | Error::SolverDiverged { .. } | Error::WalkCap(_) | Error::NotConverged { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}
