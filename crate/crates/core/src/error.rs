use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants are split into two families: violated preconditions (bad input,
/// divergent integrals, out-of-range exponents) and internal invariant
/// failures, which signal a bug rather than a bad request.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("dyadic level {level} exceeds maximum depth {max_depth}")]
    DepthExceeded { level: u32, max_depth: u32 },

    #[error("interval [{lo}, {hi}] does not meet the grid domain")]
    EmptyIntersection { lo: f64, hi: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("member {0} of the sparse family has no witness set")]
    MissingWitness(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures that indicate a bug in the library rather than bad input.
    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
