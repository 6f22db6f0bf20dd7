use thiserror::Error;

use crate::correspondence::CertificationReport;
use crate::family::CompatibilityReport;
use crate::measure::NonNegativeSpectralReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: ||A - A*||_F = {defect:e} exceeds {allowed:e}")]
    NotHermitian { defect: f64, allowed: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid tolerance: absolute={absolute}, relative={relative}")]
    InvalidTolerance { absolute: f64, relative: f64 },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("set partition enumeration over {atoms} atoms is intractable (limit {limit})")]
    IntractablePartitionCount { atoms: usize, limit: usize },

    #[error("sequence is not Cauchy: tail gap {gap:e} exceeds {allowed:e}")]
    NotCauchy { gap: f64, allowed: f64 },

    #[error("sequence is not monotone at index {index}, atom {atom}")]
    NotMonotone { index: usize, atom: usize },

    #[error("integral at index {index} exceeds the bound (margin {margin:e})")]
    BoundViolated { index: usize, margin: f64 },

    #[error("family is not compatible")]
    IncompatibleFamily(Box<CompatibilityReport>),

    #[error("representation blueprint has no multiplicity")]
    EmptyBlueprint,

    #[error("map is not a unital *-representation")]
    NotARepresentation(Box<CertificationReport>),

    #[error("measure is not a normalized non-negative spectral measure")]
    InvalidMeasure(Box<NonNegativeSpectralReport>),

    #[error("bad instance file at `{path}`: {message}")]
    BadInstance { path: String, message: String },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
