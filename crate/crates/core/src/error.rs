use std::path::PathBuf;

use thiserror::Error;

/// Every failure the harness can report.
///
/// Variants map one-to-one onto the machine-readable `kind` strings emitted by
/// the command-line front end (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot open {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported embedding file version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("corrupt payload: expected {expected} bytes, found {actual}")]
    Corrupt { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("layer {0} is not available")]
    MissingLayer(u32),

    #[error("value {value} out of range [0, 1] at row {row}, column '{column}'")]
    Range {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("rendition '{0}' is not present in the dataset")]
    MissingRendition(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("CCC loss needs a batch of at least 2 samples, got {0}")]
    InsufficientBatch(usize),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero variance in paired differences: models indistinguishable")]
    ZeroVariance,

    #[error("sample too small for the normal approximation: {0} non-zero differences (need at least 10)")]
    SmallSample(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::File { .. } => "io",
            Error::Format(_) => "format",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Corrupt { .. } => "corruption",
            Error::NonFinite { .. } => "non_finite",
            Error::Alignment(_) => "alignment",
            Error::MissingLayer(_) => "missing_layer",
            Error::Range { .. } => "range",
            Error::Schema(_) => "schema",
            Error::Duplicate(_) => "duplicate",
            Error::InfeasibleSplit(_) => "infeasible_split",
            Error::MissingRendition(_) => "missing_rendition",
            Error::EmptyInput(_) => "empty_input",
            Error::Contract(_) => "contract",
            Error::InsufficientBatch(_) => "insufficient_batch",
            Error::Divergence(_) => "divergence",
            Error::Degenerate(_) => "degenerate",
            Error::ZeroVariance => "zero_variance",
            Error::SmallSample(_) => "small_sample",
            Error::Config(_) => "config",
            Error::Fold { source, .. } => source.kind(),
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
