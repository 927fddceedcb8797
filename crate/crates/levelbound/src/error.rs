use crate::bounds::Direction;
use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Callers that need an exit status can split errors into two classes via
/// [`Error::is_numeric`]: validation problems (bad parameters, malformed
/// model files, illegal scheme/direction combinations) versus numeric
/// failures (a computed bound that fails its own drift certificate or
/// violates the lower/upper sandwich).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model file I/O failed: {0}")]
    Io(#[from] std::io::Error),

    #[error("model file parse failed: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("matrix row for level {level} has {got} entries, expected {expected}")]
    RowShape {
        level: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite probability at entry ({level},{target})")]
    NonFiniteEntry { level: usize, target: usize },

    #[error(
        "probability bounds violated at entry ({level},{target}): lo={lo}, hi={hi} \
         (need 0 <= lo <= hi <= 1)"
    )]
    ProbabilityOrder {
        level: usize,
        target: usize,
        lo: f64,
        hi: f64,
    },

    #[error("row mass at level {level} sums to {sum}, which exceeds 1")]
    RowMassExceedsOne { level: usize, sum: f64 },

    #[error("level {level} has zero improvement probability; the chain would not be absorbing")]
    NoImprovementMass { level: usize },

    #[error("exact model requires q_lo = q_hi entrywise; entry ({level},{target}) differs")]
    ExactBoundsDiffer { level: usize, target: usize },

    #[error(
        "ratio matrix inconsistent at level {level}: row sums (lo={sum_lo}, hi={sum_hi}) \
         do not bracket 1"
    )]
    RatioSum {
        level: usize,
        sum_lo: f64,
        sum_hi: f64,
    },

    #[error("ratio matrices must be supplied as a lo/hi pair or not at all")]
    RatioPairIncomplete,

    #[error("ratio matrices already present; derive_ratios expects a model without them")]
    RatiosAlreadyPresent,

    #[error(
        "level {level} has zero lower-bound improvement mass; \
         the conditional ratio upper bound is undefined for a bounded model"
    )]
    RatioUndefined { level: usize },

    #[error("operation requires an exact model")]
    ExactModelRequired,

    #[error("scheme {scheme} does not support direction {direction}")]
    SchemeDirection {
        scheme: &'static str,
        direction: Direction,
    },

    #[error("path-sum coefficients are capped at 12 levels, model has {levels}")]
    PathSumLevelCap { levels: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("start distribution sums to {sum}, expected 1")]
    StartNotNormalized { sum: f64 },

    #[error("start level {level} out of range for {levels} levels")]
    StartLevelOutOfRange { level: usize, levels: usize },

    #[error("state space 2^{n} exceeds the enumeration cap of 2^{max}")]
    StateSpaceTooLarge { n: usize, max: usize },

    #[error("simulation run {run} exceeded the generation cap of {cap}")]
    GenerationCapExceeded { run: u64, cap: u64 },

    #[error(
        "drift certificate failed for {direction} bound at level {level}: drift {drift} \
         violates the {direction} condition"
    )]
    CertificationFailed {
        direction: Direction,
        level: usize,
        drift: f64,
    },

    #[error("sandwich violated at level {level}: lower {lower} vs exact {exact} vs upper {upper}")]
    SandwichViolation {
        level: usize,
        lower: f64,
        exact: f64,
        upper: f64,
    },
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::CertificationFailed { .. } | Error::SandwichViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
