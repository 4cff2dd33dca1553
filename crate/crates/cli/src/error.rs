use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}", schema_message(.row, .column, .message))]
    Schema { row: Option<usize>, column: Option<String>, message: String },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] siprop::Error),
}

fn schema_message(row: &Option<usize>, column: &Option<String>, message: &str) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!("row {r}, column {c}: {message}"),
        (Some(r), None) => format!("row {r}: {message}"),
        (None, Some(c)) => format!("column {c}: {message}"),
        (None, None) => message.to_string(),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<&'a str>,
}

impl CliError {
    pub fn schema(row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Self {
        CliError::Schema { row, column: column.map(str::to_string), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Schema { .. } | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_DATA,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Schema { .. } => "SchemaError",
            CliError::Io { .. } => "IoError",
            CliError::Core(e) => e.kind(),
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        let (row, column) = match self {
            CliError::Schema { row, column, .. } => (*row, column.as_deref()),
            _ => (None, None),
        };
        let report = ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code(), row, column };
        serde_json::to_string(&report).expect("error report serializes")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
