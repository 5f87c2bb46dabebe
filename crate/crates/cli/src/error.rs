use serde::Serialize;
use thiserror::Error;

/// Failure class; decides the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug, Clone, Error, Serialize)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// 1-based data row (header excluded).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), row: None, column: None }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Usage, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Data, message)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Numerical, message)
    }

    pub fn at(mut self, row: usize, column: Option<&str>) -> Self {
        self.row = Some(row);
        self.column = column.map(str::to_string);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "schema_version": crate::SCHEMA_VERSION, "error": self }).to_string()
    }
}

impl From<finreg::Error> for CliError {
    fn from(e: finreg::Error) -> Self {
        use finreg::Error as E;
        let kind = match &e {
            E::Observation { .. } | E::Dimension(_) => ErrorKind::Data,
            E::Domain(_) | E::Infeasible(_) | E::SingularInformation { .. } | E::NotNested(_) => ErrorKind::Numerical,
            E::InvalidInput(_) | E::PenalizedInference { .. } | E::Unsupported(_) => ErrorKind::Usage,
        };
        let row = match &e {
            E::Observation { row, .. } => Some(row + 1),
            _ => None,
        };
        CliError { kind, message: e.to_string(), row, column: None }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line().saturating_sub(1) as usize);
        CliError { kind: ErrorKind::Data, message: e.to_string(), row, column: None }
    }
}
