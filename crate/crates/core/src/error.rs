use thiserror::Error;

/// Errors produced by code construction, conversion and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported field width {0} (expected 4, 8 or 16)")]
    UnsupportedWidth(u8),
    #[error("modulus {modulus:#x} is not an irreducible polynomial of degree {width}")]
    InvalidModulus { width: u8, modulus: u32 },
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("duplicate index {0}")]
    DuplicateIndex(usize),
    #[error("cannot puncture {requested} symbols from a code with n - k = {limit}")]
    TooManyPunctured { requested: usize, limit: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter regime violation: {0}")]
    Regime(String),
    #[error("construction failed after {attempts} attempts (last field width {width})")]
    ConstructionFailed { attempts: usize, width: u8 },
    #[error("stripe {0} is not a codeword of the initial code")]
    InvalidStripe(usize),
    #[error("unsupported conversion target: {0}")]
    UnsupportedTarget(String),
    #[error("subsymbol (stripe {stripe}, node {node}, coordinate {coord}) was not downloaded")]
    NotDownloaded {
        stripe: usize,
        node: usize,
        coord: usize,
    },
    #[error("infeasible layout: {0}")]
    Infeasible(String),
    #[error("search budget exceeded ({0} candidates)")]
    BudgetExceeded(usize),
    #[error("too many erasures: {erased} erased, code tolerates {tolerance}")]
    TooManyErasures { erased: usize, tolerance: usize },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
