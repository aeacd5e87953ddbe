use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more records in a layout file failed to parse or validate.
    #[error("{}", format_parse_errors(.0))]
    Parse(Vec<LineError>),

    /// A layout violated structural invariants where a valid one was required.
    #[error("invalid layout `{id}`: {details}")]
    InvalidLayout { id: String, details: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Placement or perturbation could not find a non-overlapping position
    /// within the retry budget.
    #[error("placement exhausted after {attempts} attempts (table too crowded)")]
    PlacementExhausted { attempts: usize },

    /// Token or feature inputs outside the range the vocabulary covers.
    #[error("tokenize: {0}")]
    Tokenize(String),

    #[error("feature extraction: {0}")]
    Feature(String),

    /// Checkpoint/artifact incompatible with the requested operation.
    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Non-finite value encountered during training or inference.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parse failure tied to a 1-based line number.
#[derive(Debug, Clone)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

fn format_parse_errors(errors: &[LineError]) -> String {
    let mut out = format!("{} invalid record(s):", errors.len());
    for e in errors.iter().take(10) {
        out.push_str(&format!("\n  line {}: {}", e.line, e.message));
    }
    if errors.len() > 10 {
        out.push_str(&format!("\n  ... and {} more", errors.len() - 10));
    }
    out
}

pub type Result<T> = std::result::Result<T, Error>;
