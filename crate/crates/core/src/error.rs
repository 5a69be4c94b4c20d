//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by PGF evaluation, root finding, fitting and sampling.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument or parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver or optimizer failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A truncated pmf left too much probability mass unaccounted for.
    #[error("truncation error: tail mass {tail_mass:.3e} exceeds {limit:.1e} at n_truncation = {n_truncation}")]
    Truncation {
        tail_mass: f64,
        limit: f64,
        n_truncation: usize,
    },

    /// The affine fit was degenerate (non-positive slope or collapsed grid).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
