use serde::Serialize;
use std::fmt;
use std::path::Path;

/// Failure reported to the user as one JSON object on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            path: None,
            line: None,
            column: None,
        }
    }

    pub fn parse(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            column: Some(column),
            ..Self::new("parse", message).at(path)
        }
    }

    pub fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.display().to_string());
        self
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("io", e.to_string()).at(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", self.kind))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)?;
        if let Some(p) = &self.path {
            write!(f, " ({p}")?;
            if let (Some(l), Some(c)) = (self.line, self.column) {
                write!(f, ":{l}:{c}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<radiomap::Error> for CliError {
    fn from(e: radiomap::Error) -> Self {
        let kind = match e {
            radiomap::Error::InvalidArgument(_) | radiomap::Error::ShapeMismatch { .. } => "invalid_argument",
            radiomap::Error::Infeasible(_) => "infeasible",
            radiomap::Error::Diverged { .. } => "diverged",
            radiomap::Error::Degenerate(_) => "degenerate",
            _ => "model",
        };
        Self::new(kind, e.to_string())
    }
}
