use std::path::PathBuf;

use docbi_core::ErrorKind;
use serde::{Deserialize, Serialize};

use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Core(#[from] docbi_core::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    /// Malformed input caught before it reaches the engine.
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Startup(String),
}

impl GatewayError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GatewayError::Core(e) => e.kind(),
            GatewayError::Store(_) | GatewayError::Input { .. } | GatewayError::Startup(_) => ErrorKind::Io,
            GatewayError::Invalid(_) => ErrorKind::Validation,
        }
    }

    /// Process exit status: 1 for validation or syntax problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Io | ErrorKind::Internal => 2,
            _ => 1,
        }
    }
}

/// Wire codes of [`ApiError`]. Each core error kind maps to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApiErrorCode {
    Validation,
    NotFound,
    Syntax,
    Conflict,
    Internal,
}

impl From<ErrorKind> for ApiErrorCode {
    fn from(kind: ErrorKind) -> Self {
        match kind {
            ErrorKind::Validation => ApiErrorCode::Validation,
            ErrorKind::NotFound => ApiErrorCode::NotFound,
            ErrorKind::Syntax => ApiErrorCode::Syntax,
            ErrorKind::Conflict => ApiErrorCode::Conflict,
            ErrorKind::Io | ErrorKind::Internal => ApiErrorCode::Internal,
        }
    }
}

impl ApiErrorCode {
    pub fn status(self) -> u16 {
        match self {
            ApiErrorCode::Validation | ApiErrorCode::Syntax => 400,
            ApiErrorCode::NotFound => 404,
            ApiErrorCode::Conflict => 409,
            ApiErrorCode::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ApiErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(code: ApiErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ApiErrorCode::Validation, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ApiErrorCode::NotFound, message)
    }
}

impl From<&GatewayError> for ApiError {
    fn from(e: &GatewayError) -> Self {
        let mut out = ApiError::new(e.kind().into(), e.to_string());
        if let GatewayError::Core(core) = e {
            if let Some(syntax) = core.syntax() {
                out.detail = Some(serde_json::json!({
                    "position": syntax.position,
                    "token": syntax.token,
                }));
            } else if let Some(attr) = core.attribute() {
                out.detail = Some(serde_json::json!({ "attribute": attr }));
            }
        }
        if let GatewayError::Store(s) = e {
            out.detail = Some(serde_json::json!({ "file": s.path().display().to_string() }));
        }
        out
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError::from(&e)
    }
}

impl From<docbi_core::Error> for ApiError {
    fn from(e: docbi_core::Error) -> Self {
        ApiError::from(GatewayError::Core(e))
    }
}
