use std::io;

/// Errors raised anywhere in the ranking pipeline.
///
/// [`Error::category`] gives a stable, machine-readable name for each variant;
/// the CLI prints it as the first token of its error line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unexpected header: expected column {expected:?} at position {position}, found {found:?}")]
    UnknownColumn {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-binary is_click value {value:?} at line {line}")]
    NonBinaryLabel { line: u64, value: String },

    #[error("query {query_id:?} has {size} rows, expected 6")]
    GroupSize { query_id: String, size: usize },

    #[error("duplicate product_id {0:?}")]
    DuplicateProductId(String),

    #[error("impression row {row} references product {product_id:?} which is absent from the product table")]
    MissingProduct { row: usize, product_id: String },

    #[error("synthetic data needs at least 6 products, got {0}")]
    TooFewProducts(usize),

    #[error("continuous column {0:?} has no non-missing values")]
    AllMissingColumn(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("feature matrix has too few rows to train on")]
    EmptyMatrix,

    #[error("feature matrix has no labels")]
    Unlabeled,

    #[error("feature matrix was encoded by {found}, model expects {expected}")]
    EncoderMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("every trial failed")]
    AllTrialsFailed,

    #[error("fold count must be at least 2 and at most the row count, got {0}")]
    BadK(usize),

    #[error("no label for query {query_id:?}, product {product_id:?}")]
    MissingLabel { query_id: String, product_id: String },

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::UnknownColumn { .. } => "UnknownColumn",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::NonBinaryLabel { .. } => "NonBinaryLabel",
            Error::GroupSize { .. } => "GroupSizeError",
            Error::DuplicateProductId(_) => "DuplicateProductId",
            Error::MissingProduct { .. } => "MissingProduct",
            Error::TooFewProducts(_) => "TooFewProducts",
            Error::AllMissingColumn(_) => "AllMissingColumn",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::SingleClass => "SingleClassError",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::Unlabeled => "Unlabeled",
            Error::EncoderMismatch { .. } => "EncoderMismatch",
            Error::InvalidParam(_) => "InvalidParam",
            Error::AllTrialsFailed => "AllTrialsFailed",
            Error::BadK(_) => "BadK",
            Error::MissingLabel { .. } => "MissingLabel",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::Io(_) => "IoError",
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(_) => "IoError",
                _ => "MalformedRow",
            },
            Error::Json(_) => "MalformedDocument",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
