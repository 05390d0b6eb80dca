use crate::mart::MartError;
use crate::query::{QueryError, SyntaxError};
use crate::user::UserModelError;
use crate::warehouse::WarehouseError;

/// Any failure surfaced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Warehouse(#[from] WarehouseError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    User(#[from] UserModelError),
    #[error(transparent)]
    Mart(#[from] MartError),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Stable classification of errors, shared by the CLI exit codes and the
/// HTTP status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Validation,
    NotFound,
    Syntax,
    Conflict,
    Io,
    Internal,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::NotFound => "not-found",
            ErrorKind::Syntax => "syntax",
            ErrorKind::Conflict => "conflict",
            ErrorKind::Io => "io",
            ErrorKind::Internal => "internal",
        }
    }
}

impl From<SyntaxError> for Error {
    fn from(e: SyntaxError) -> Self {
        Error::Query(QueryError::Syntax(e))
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Warehouse(WarehouseError::Io(_)) => ErrorKind::Io,
            Error::Warehouse(WarehouseError::Corrupt(_)) => ErrorKind::Internal,
            Error::Warehouse(_) => ErrorKind::Validation,
            Error::Query(QueryError::Syntax(_)) => ErrorKind::Syntax,
            Error::Query(QueryError::InvalidClassification(_)) => ErrorKind::Validation,
            Error::User(UserModelError::Validation(_)) => ErrorKind::Validation,
            Error::User(UserModelError::NotFound(_)) => ErrorKind::NotFound,
            Error::User(UserModelError::Conflict(_)) => ErrorKind::Conflict,
            Error::User(UserModelError::Syntax(_)) => ErrorKind::Syntax,
            Error::Mart(MartError::NotFound(_)) => ErrorKind::NotFound,
            Error::Mart(_) => ErrorKind::Validation,
        }
    }

    /// The syntax error behind this failure, if any.
    pub fn syntax(&self) -> Option<&SyntaxError> {
        match self {
            Error::Query(QueryError::Syntax(e)) | Error::User(UserModelError::Syntax(e)) => Some(e),
            _ => None,
        }
    }

    /// The attribute a schema failure is about.
    pub fn attribute(&self) -> Option<&str> {
        match self {
            Error::Mart(MartError::UnknownAttribute(a) | MartError::UnknownDimension(a)) => Some(a),
            _ => None,
        }
    }
}
