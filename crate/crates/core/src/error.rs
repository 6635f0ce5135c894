use thiserror::Error;

/// Errors raised by the tree, measure, kernel and operator routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("branching parameter q must be at least 2, got {0}")]
    InvalidBranching(u32),

    #[error("label {label} at position {position} of {address} is out of range (max {max})")]
    LabelOutOfRange {
        address: String,
        position: usize,
        label: u32,
        max: u32,
    },

    #[error("cannot parse vertex address {0:?}")]
    AddressParse(String),

    #[error("region is unbounded: {0}")]
    UnboundedRegion(String),

    #[error("the root has no predecessor")]
    NoPredecessor,

    #[error("sequence index {0} is below -1")]
    IndexBelowMinusOne(i64),

    #[error("measure not finite: {0}")]
    MeasureNotFinite(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("tail bound {tail:e} exceeds {fraction} of partial sum {partial:e}")]
    TailTooLarge { partial: f64, tail: f64, fraction: f64 },

    #[error("function undefined at neighbor {neighbor} of {vertex}")]
    OutsideSupport { vertex: String, neighbor: String },

    #[error("function is not harmonic at {vertex}: laplacian = {value:e}")]
    NotHarmonic { vertex: String, value: f64 },

    #[error("basis index j={j} out of range 1..={max} for vertex {vertex}")]
    BasisIndex { vertex: String, j: usize, max: usize },

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last:e})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("level t={t:e} must exceed |f|_1 / mu(X) = {threshold:e}")]
    LevelTooLow { t: f64, threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;
