use thiserror::Error as ThisError;

#[derive(Debug, ThisError, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// The Krylov matrix `[e, Me, ..., M^{n-1}e]` is numerically singular.
    #[error("Krylov degenerate: smallest/largest singular value ratio {ratio:e}")]
    KrylovDegenerate { ratio: f64 },
    #[error("coincident points: gap {gap:e} below guard")]
    CoincidentPoints { gap: f64 },
    /// A combinatorial enumeration would be too large to run exactly.
    #[error("size guard exceeded for {what}: about {estimate} terms")]
    Guard { what: String, estimate: f64 },
    /// Numerical degeneracy, e.g. too many flagged paths.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
