//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no @data section found in KEEL input")]
    MissingHeader,
    #[error("data row {row}: expected {expected} values, found {found}")]
    ArityMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("data row {row}: class label {label:?} is not in the declared label set")]
    UnknownClassLabel { row: usize, label: String },
    #[error("data row {row}, column {col}: cannot parse {value:?} as a number")]
    NonNumericFeature {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("class with {count} samples cannot be split into {k} stratified folds")]
    TooFewSamplesPerClass { count: usize, k: usize },
    #[error("operation requires both classes but only one is present")]
    SingleClass,
    #[error("positive class must be the minority class (enforce the label convention at load)")]
    PositiveNotMinority,
    #[error("hidden layer width must be at least 1")]
    InvalidWidth,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel width mu must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("locality scale sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("class index set is empty")]
    EmptyClass,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max deviation {max_dev:e} exceeds {tol:e})")]
    NotSymmetric { max_dev: f64, tol: f64 },
    #[error("penalty matrix is singular even after the ridge term; increase eps or check Z")]
    SingularPenalty,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("model/data mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("test fold lacks one of the classes; cannot compute sensitivity/specificity")]
    EmptyClassInTest,
    #[error("non-finite value encountered in input")]
    NonFinite,
    #[error("degenerate inputs: {0}")]
    DegenerateInputs(String),
    #[error("critical-difference table covers 2..=10 models, got {0}")]
    UnsupportedD(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
