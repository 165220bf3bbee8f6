use thiserror::Error;

/// Errors raised by grid construction, functional evaluation, and solvers.
#[derive(Debug, Error)]
pub enum ChandraError {
    /// Mismatched array lengths, wrong grid, or other structural misuse.
    #[error("structural error: {0}")]
    Structure(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Grid construction produced an invalid quadrature rule.
    #[error("grid construction failed: {0}")]
    GridConstruction(String),

    /// ODE integration or root bracketing failed.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Normalization system for the optimizer profile did not close.
    #[error("profile construction failed: {0}")]
    ProfileConstruction(String),

    /// Chemical-potential bracket expansion exceeded its limit.
    #[error("chemical potential bracket failure: {0}")]
    MuBracket(String),

    /// Converged density touches the truncation radius.
    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    /// Request outside the subcritical regime handled by the minimizer.
    #[error("no minimizer: {0}")]
    Supercritical(String),

    /// Fit preconditions violated (window too small, sign change, ...).
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, ChandraError>;
