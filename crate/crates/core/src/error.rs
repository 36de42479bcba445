use std::fmt;
use std::path::PathBuf;

/// One rejected input row, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("optimizer error: parameter `{path}` {reason}")]
    Optimizer { path: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{} invalid row(s): {}", .0.len(), join_rows(.0))]
    Rows(Vec<RowError>),

    #[error("size error: {0}")]
    Size(String),

    #[error("input error: missing modality `{0}`")]
    MissingModality(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("non-finite loss at step {step} (parameter norms: {})", format_norms(.param_norms))]
    NonFiniteLoss {
        step: usize,
        param_norms: Vec<(String, f64)>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Stable machine-readable category, used for structured CLI errors.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Contract(_) => "contract",
            Error::Label(_) => "label",
            Error::Optimizer { .. } => "optimizer",
            Error::Config(_) => "configuration",
            Error::Vocabulary(_) => "vocabulary",
            Error::Validation(_) | Error::Rows(_) => "validation",
            Error::Size(_) => "size",
            Error::MissingModality(_) => "input",
            Error::Capability(_) => "capability",
            Error::Lookup(_) => "lookup",
            Error::NonFiniteLoss { .. } => "numeric",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serialization",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_norms(norms: &[(String, f64)]) -> String {
    norms
        .iter()
        .map(|(p, n)| format!("{p}={n:.4e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
