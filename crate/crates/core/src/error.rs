use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown label `{token}` for variable {variable} at row {row}")]
    UnknownLabel {
        variable: String,
        row: usize,
        token: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("negative count {count} for {variable}={label}")]
    NegativeCount {
        variable: String,
        label: String,
        count: String,
    },

    #[error("invalid count `{count}` for {variable}={label}")]
    InvalidCount {
        variable: String,
        label: String,
        count: String,
    },

    #[error("variable {0} has zero total count")]
    AllZeroMarginal(String),

    #[error("category code {code} out of range for variable {variable} ({cardinality} labels)")]
    CodeOutOfRange {
        variable: String,
        code: u32,
        cardinality: usize,
    },

    #[error("schema mismatch at variable {0}")]
    SchemaMismatch(String),

    #[error("empty table")]
    EmptyTable,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty projection: every variable is excluded")]
    EmptyProjection,

    #[error(
        "contingency table needs {cells} cells, over the budget of {budget}; reduce the number of variables"
    )]
    Capacity { cells: u128, budget: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("external generator failed: {0}")]
    External(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short stable identifier, used for the machine-parsable CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Schema(_) => "schema",
            Error::MissingColumn(_) => "missing_column",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::UnknownVariable(_) => "unknown_variable",
            Error::NegativeCount { .. } => "negative_count",
            Error::InvalidCount { .. } => "invalid_count",
            Error::AllZeroMarginal(_) => "all_zero_marginal",
            Error::CodeOutOfRange { .. } => "code_out_of_range",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::EmptyTable => "empty_table",
            Error::TooFewRows { .. } => "too_few_rows",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyProjection => "empty_projection",
            Error::Capacity { .. } => "capacity",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::External(_) => "external",
        }
    }
}
