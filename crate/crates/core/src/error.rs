use std::fmt;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside its allowed domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested size exceeds a configured hard cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The collapse-process projection vanished; the record has probability zero.
    #[error("inconsistent record at node {node}: projection norm {norm:e}")]
    InconsistentRecord { node: usize, norm: f64 },

    /// Malformed input file.
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    /// Input written by an incompatible format version.
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    /// The root-finding function has no sign change on the bracket.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where in an input a parse error occurred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column in a text stream.
    Text { line: usize, column: usize },
    /// Dotted path to a field inside a structured document, with its line
    /// when the document is line-oriented.
    Field { line: Option<usize>, path: String },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Text { line, column } => write!(f, "line {line}, column {column}"),
            Location::Field { line: Some(line), path } => write!(f, "line {line}, field `{path}`"),
            Location::Field { line: None, path } => write!(f, "field `{path}`"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
