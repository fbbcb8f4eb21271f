use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the hold-out analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column {0:?} not found in header")]
    UnknownColumn(String),

    #[error("target column {0:?} contains non-numeric value {1:?} at row {2}")]
    NonNumericTarget(String, String, usize),

    #[error("missing value at (row {row}, column {column:?})")]
    MissingValue { row: usize, column: String },

    #[error("categorical column {0:?} rejected by policy")]
    CategoricalRejected(String),

    #[error("non-finite value at (row {row}, column {column:?})")]
    NonFinite { row: usize, column: String },

    #[error("dataset has {n_rows} rows but needs more than {min_rows} for {n_features} features")]
    TooFewRows {
        n_rows: usize,
        n_features: usize,
        min_rows: usize,
    },

    #[error("hold-out size m={m} out of range [1, {max}]")]
    HoldOutSizeOutOfRange { m: usize, max: usize },

    #[error("fold count K={k} out of range [2, {max}]")]
    FoldCountOutOfRange { k: usize, max: usize },

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "anchors are not monotone increasing: beta = {beta:.6} must lie in (0, 1) \
         (l_loo = {l_loo}, l_kref = {l_kref}, l_lmo = {l_lmo})"
    )]
    NonMonotoneAnchors {
        beta: f64,
        l_loo: f64,
        l_kref: f64,
        l_lmo: f64,
    },

    #[error("anchor losses span zero range (l_lmo = l_loo = {0})")]
    ZeroAnchorScale(f64),

    #[error("need at least {needed} points with strictly increasing m, got {got}")]
    TooFewCurvePoints { needed: usize, got: usize },

    #[error("duplicate or non-increasing m value {0} in curve points")]
    NonIncreasingCurvePoints(f64),

    #[error("m={m} outside curve domain [{min}, {max}]; extrapolation is not supported")]
    Extrapolation { m: usize, min: usize, max: usize },

    #[error("loss curve is negative at m={m} for sigma2={sigma2}: sigma2 is infeasible there")]
    NegativeLoss { m: usize, sigma2: f64 },

    #[error("curve is infeasible for every sigma2 > 0")]
    CurveInfeasible,

    #[error("divergence unavailable: SURE requires a linear smoother (ols)")]
    DivergenceUnavailable,

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
