use thiserror::Error;

use crate::outage::Scheme;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quadrature integrand produced a NaN or infinity at a node.
    #[error("non-finite integrand value {value} at quadrature node {node}")]
    NumericalDomain { node: usize, value: f64 },

    #[error(
        "{rounds}-round IR-HARQ outage exceeds the nested-quadrature cap of {max} rounds; \
         use the Monte Carlo simulator instead"
    )]
    UnsupportedDimension { rounds: usize, max: usize },

    #[error("operation not supported for the {0} scheme")]
    UnsupportedScheme(Scheme),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
