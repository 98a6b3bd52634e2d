use alloc::string::String;

use crate::metrics::Group;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} must satisfy {constraint}, got {value}")]
    Domain {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The conditioning event `E <= t` has zero probability.
    #[error("conditional quantity undefined at t = {t}: exposure CDF is zero")]
    UndefinedConditional { t: f64 },

    #[error(
        "quadrature on [{lower}, {upper}] did not converge after {intervals} subintervals \
         (estimate {estimate}, error bound {error_bound})"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error_bound: f64,
        intervals: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("insufficient data in {group} group: {count} measured users")]
    InsufficientData { group: Group, count: usize },

    #[error("degenerate variance: all measurements identical")]
    DegenerateVariance,

    #[error("analysis time {t} is beyond the panel horizon {horizon}")]
    OutOfRange { t: f64, horizon: u32 },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, constraint: &'static str, value: f64) -> Self {
        Error::Domain {
            what,
            constraint,
            value,
        }
    }
}
