use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// Error body: `{"error": {"code", "message", "details"?}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<sencorp::Error> for ApiError {
    fn from(err: sencorp::Error) -> Self {
        use sencorp::Error as E;
        let message = err.to_string();
        match err {
            E::EmptyBatch => ApiError::bad_request("empty_batch", message),
            E::ZeroEmbedding { indices } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "zero_embedding", message)
                    .with_details(json!({ "indices": indices }))
            }
            E::UndefinedSimilarity | E::EmptyText => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "zero_embedding", message)
            }
            E::Unlabeled { id } => {
                ApiError::bad_request("unlabeled_item", message).with_details(json!({ "id": id }))
            }
            E::InvalidConfig(_) => ApiError::bad_request("bad_request", message),
            E::DuplicateId(_) => ApiError::new(StatusCode::CONFLICT, "duplicate_id", message),
            _ => ApiError::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(details) = self.details {
            error["details"] = details;
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}
