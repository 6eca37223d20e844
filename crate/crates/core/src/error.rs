use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or model parameter is outside its domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A simplex point touches the boundary where the stick-breaking
    /// inverse is undefined.
    #[error("simplex boundary: {0}")]
    Boundary(String),

    /// A factorization failed even after jitter escalation.
    #[error("linear algebra failure in {op}: {detail}")]
    LinAlg { op: &'static str, detail: String },

    /// Malformed or inconsistent input data.
    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn linalg(op: &'static str, detail: impl Into<String>) -> Self {
        Error::LinAlg { op, detail: detail.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
