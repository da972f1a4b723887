use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid simplex point: {0}")]
    InvalidSimplex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("visit vector {counts:?} lies outside the tabulated box {{0..{box_size}}}^d")]
    OutOfBox { counts: Vec<u32>, box_size: u32 },

    #[error("numeric underflow while evaluating {0}")]
    NumericUnderflow(String),

    #[error(
        "path products to {endpoint:?} disagree by {gap:e} in log space; the law is not admissible"
    )]
    PathDependence { endpoint: Vec<u32>, gap: f64 },

    #[error("law is not admissible on the box of size {box_size} ({violations} violations)")]
    NonAdmissible { box_size: u32, violations: usize },

    #[error("request of total degree {requested} exceeds table order {order}")]
    OutOfOrder { requested: u64, order: u32 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("quadrature oracle unsupported: {0}")]
    OracleUnsupported(String),

    #[error("enumeration would visit {paths} paths, above the limit of {limit}")]
    EnumerationGuard { paths: u128, limit: u128 },

    #[error("distributions have different supports: {0}")]
    SupportMismatch(String),

    #[error("too few samples: {found} (need at least {required})")]
    TooFewSamples { found: usize, required: usize },
}
