use std::fmt;

use serde_json::json;

/// A failure classified by who has to fix it.
#[derive(Debug, Clone, PartialEq)]
pub enum AppError {
    /// Bad arguments or configuration. Exit code 1.
    Usage(String),
    /// Input data that cannot be used. Exit code 2.
    Data {
        message: String,
        row: Option<usize>,
        column: Option<String>,
    },
    /// Anything else. Exit code 3.
    Internal(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        AppError::Data {
            message: message.into(),
            row: None,
            column: None,
        }
    }

    /// A data error at a 1-based data row (header excluded) and column.
    pub fn at(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Data {
            message: message.into(),
            row: Some(row),
            column: Some(column.into()),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        AppError::Internal(message.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Usage(_) => "usage",
            AppError::Data { .. } => "data",
            AppError::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data { .. } => 2,
            AppError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Internal(m) => m,
            AppError::Data { message, .. } => message,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "kind": self.kind(), "message": self.message() });
        if let AppError::Data { row, column, .. } = self {
            if let Some(r) = row {
                body["row"] = json!(r);
            }
            if let Some(c) = column {
                body["column"] = json!(c);
            }
        }
        json!({ "error": body })
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Data {
                message,
                row: Some(r),
                column: Some(c),
            } => write!(f, "row {r}, column {c:?}: {message}"),
            _ => f.write_str(self.message()),
        }
    }
}

impl std::error::Error for AppError {}

impl From<ballmapper::Error> for AppError {
    fn from(e: ballmapper::Error) -> Self {
        use ballmapper::Error as E;
        match e {
            E::InvalidEpsilon(_)
            | E::InvalidParameter(_)
            | E::UnknownFormat(_)
            | E::InvalidOrder { .. } => AppError::Usage(e.to_string()),
            E::ConstantColumn { ref name, .. } => AppError::Data {
                message: e.to_string(),
                row: None,
                column: Some(name.clone()),
            },
            E::DimensionMismatch { .. }
            | E::InvalidCloud(_)
            | E::MissingColorSource(_)
            | E::LengthMismatch { .. }
            | E::MalformedGraph(_) => AppError::data(e.to_string()),
        }
    }
}
