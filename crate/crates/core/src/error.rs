use thiserror::Error;

/// Errors raised by lattice, sampling and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("basis is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("basis is singular: |det| = {det:e} relative to column norms")]
    SingularBasis { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("sigma must be positive, got {0}")]
    NonpositiveSigma(f64),

    #[error("unknown lattice name `{0}`")]
    UnknownName(String),

    #[error("dimension {dim} exceeds the limit {max} for this operation")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("flatness factor {epsilon} is not below 1")]
    FlatnessTooLarge { epsilon: f64 },

    #[error("insufficient errors for a ratio test: scheme {scheme}, poltyrev {poltyrev} (need {required})")]
    InsufficientErrors {
        scheme: u64,
        poltyrev: u64,
        required: u64,
    },

    #[error("volume-to-noise ratio must be at least 1, got {0}")]
    MuBelowOne(f64),

    #[error("generator matrix has rank {rank} < k = {k} over Z_{p}")]
    RankDeficientCode { rank: usize, k: usize, p: u64 },

    #[error("could not draw a full-rank code after {0} attempts")]
    RandomnessExhausted(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LatticeError>;
