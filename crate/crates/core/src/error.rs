use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("autoregressive coefficient |a| = {value} >= 1 at index {index}")]
    NonStationaryCoefficient { index: usize, value: f64 },

    #[error("standard deviation {value} <= 0 at index {index}")]
    NonPositiveScale { index: usize, value: f64 },

    #[error("too few replicates: got {got}, need at least {need}")]
    TooFewReplicates { got: usize, need: usize },

    #[error("Q = {q} outside the admissible range [1, {threshold}) for alpha = {alpha}")]
    InadmissibleIndex { q: f64, alpha: f64, threshold: f64 },

    #[error("kappa = {kappa} outside (0, {upper})")]
    KappaOutOfRange { kappa: f64, upper: f64 },

    #[error("series cannot be certified: {0}")]
    Uncertifiable(String),

    #[error("integral diverges: integrand behaves like eps^{exponent} near 0")]
    Divergent { exponent: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("nu must be an even integer >= 2 for mixing moment bounds (got {0})")]
    OddMomentOrder(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
