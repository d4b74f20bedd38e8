use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` is missing from the header")]
    MissingColumn(String),

    #[error("no usable data rows in {}", .0.display())]
    EmptyFile(PathBuf),

    #[error("input is empty: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("no transfers {0} inside the configured window")]
    EmptyWindow(String),

    #[error("inputs are not aligned: {0}")]
    MisalignedInputs(String),

    #[error("class `{0}` has fewer than 2 members")]
    ClassTooSmall(String),

    #[error("training rows contain a single class")]
    SingleClassTrain,

    #[error("test set is empty")]
    EmptyTest,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed rule file line {line}: {msg}")]
    RuleSyntax { line: usize, msg: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier printed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::EmptyFile(_) => "EmptyFile",
            Error::EmptyInput(_) => "EmptyInput",
            Error::DegenerateGraph(_) => "DegenerateGraph",
            Error::EmptyWindow(_) => "EmptyWindow",
            Error::MisalignedInputs(_) => "MisalignedInputs",
            Error::ClassTooSmall(_) => "ClassTooSmall",
            Error::SingleClassTrain => "SingleClassTrain",
            Error::EmptyTest => "EmptyTest",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::RuleSyntax { .. } => "RuleSyntax",
            Error::Parse(_) => "ParseError",
            Error::NonFinite(_) => "NonFinite",
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
