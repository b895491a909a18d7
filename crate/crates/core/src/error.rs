use thiserror::Error;

/// Errors raised by the simulation, estimation and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The post-selected state is orthogonal to the pre-selected one, so the
    /// weak value (and every linearized quantity built on it) diverges.
    #[error("post-selection is orthogonal to pre-selection (|<phi|psi>| = {overlap:e})")]
    OrthogonalPostselection { overlap: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("distribution has no positive weight")]
    EmptyDistribution,

    #[error("truncated support needs {required} entries, budget is {budget}")]
    ResourceLimit { required: u64, budget: u64 },

    #[error("post-selection rate {rate:e} underflows")]
    DegeneratePostselection { rate: f64 },

    #[error("ensemble has zero photon-number variance")]
    ZeroVariance,

    #[error("Fisher information must be positive, got {fisher:e}")]
    NonpositiveInformation { fisher: f64 },

    #[error("no trial survived post-selection out of {total_trials}")]
    NoPostselectedTrials { total_trials: u64 },

    #[error("requested std {requested:e} photons is outside the achievable range [{min:e}, {max:e}]")]
    UnreachableVariance { requested: f64, min: f64, max: f64 },

    #[error("design matrix is rank deficient")]
    SingularFit,

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("pmf line {line}: {message}")]
    PmfParse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
