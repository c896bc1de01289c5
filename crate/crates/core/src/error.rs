use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unstable moduli space: 2g - 2 + n = {} is not positive for (g, n) = ({g}, {n})", 2 * (*g as i64) - 2 + (*n as i64))]
    Unstable { g: u32, n: u32 },

    #[error("invalid stable graph: {0}")]
    InvalidGraph(String),

    #[error("decoration does not fit its graph: {0}")]
    DanglingDecoration(String),

    #[error("ambient mismatch: ({0}, {1}) vs ({2}, {3})")]
    AmbientMismatch(u32, u32, u32, u32),

    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),

    #[error("degree {degree} out of range 0..={max}")]
    DegreeOutOfRange { degree: u32, max: u32 },

    #[error("dimension constraint violated: {0}")]
    Dimension(String),

    #[error("weights must sum to zero, got {0}")]
    WeightSum(i64),

    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: u32, got: usize },

    #[error("width mismatch: {0} vs {1}")]
    WidthMismatch(usize, usize),

    #[error("interpolation inconsistency: {0}")]
    Interpolation(String),

    #[error("pairing perfectness is not certified for (g, n, d) = ({g}, {n}, {d}); pass the unverified-extended flag to get lower bounds")]
    NotCertified { g: u32, n: u32, d: u32 },

    #[error("invalid cone complex: {0}")]
    InvalidComplex(String),

    #[error("incompatible identification: {0}")]
    IncompatibleIdentification(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Errors that indicate a failed internal consistency check rather than bad input.
    pub fn is_consistency_failure(&self) -> bool {
        matches!(self, Error::Interpolation(_) | Error::NotCertified { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
