use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid subshift: {0}")]
    InvalidSpec(String),

    #[error("invalid cylinder function: {0}")]
    InvalidFunction(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("objects live on different subshifts")]
    SpecMismatch,

    #[error("depth {found} not allowed here (expected {expected})")]
    DepthMismatch { expected: String, found: usize },

    #[error("word {0:?} is not admissible")]
    InadmissibleWord(Vec<usize>),

    #[error("transition matrix is not primitive")]
    NonPrimitive,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("operator is not normalized: sup |L1 - 1| = {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("eigenfunction is not strictly positive")]
    NonPositiveEigenfunction,

    #[error("min H = {min_h} must exceed 1")]
    HNotExpanding { min_h: f64 },

    #[error("topological entropy is zero; Bowen equation has no positive root")]
    DegenerateSystem,

    #[error("optimizer failed: {message} (iterations {iterations}, gradient norm {gradient_norm:e})")]
    Optimizer {
        message: String,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NotNormalized { .. }
                | Error::NonPositiveEigenfunction
                | Error::Optimizer { .. }
                | Error::NonPrimitive
                | Error::DegenerateSystem
                | Error::HNotExpanding { .. }
        )
    }
}
