use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by what the caller can do about them: validation
/// errors mean the input data or parameters are wrong, solver errors mean a
/// numerical routine could not produce an answer, and I/O errors come from
/// reading or writing files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no rows")]
    NoRows,

    #[error("score out of domain: {score} not in [{lo}, {hi}] (row {row})")]
    ScoreOutOfDomain {
        row: usize,
        score: f64,
        lo: f64,
        hi: f64,
    },

    #[error("non-finite score at row {row}")]
    NonFiniteScore { row: usize },

    #[error("missing or unparsable score at row {row}: {value:?}")]
    BadScore { row: usize, value: String },

    #[error("csv header has no {0:?} column")]
    MissingColumn(&'static str),

    #[error("non-binary label {label} at row {row}")]
    NonBinaryLabel { row: usize, label: String },

    #[error("group {group} has {count} row(s); at least 2 are required")]
    GroupTooSmall { group: String, count: usize },

    #[error("group {group} empty under {condition}")]
    EmptyConditionalGroup { group: String, condition: String },

    #[error("group {group} has only {count} row under {condition}; at least 2 are required")]
    ConditionalGroupTooSmall {
        group: String,
        condition: String,
        count: usize,
    },

    #[error("metric conditions on {condition} but the dataset has unlabeled rows")]
    MissingLabels { condition: String },

    #[error("invalid score domain [{lo}, {hi}]")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("need at least {needed} groups, found {found}")]
    TooFewGroups { needed: usize, found: usize },

    #[error("expected exactly 2 groups, found {0}")]
    NotBinary(usize),

    #[error("unknown group {0}")]
    UnknownGroup(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid joint spec: {0}")]
    InvalidSpec(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("groups equally shifted; λ undefined (denominator {denominator:e})")]
    ZeroDenominator { denominator: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse category used by frontends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Solver(_) | Error::ZeroDenominator { .. } => ErrorKind::Solver,
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
