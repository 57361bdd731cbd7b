use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} is outside the domain: {reason}")]
    Domain { t: f64, reason: &'static str },

    #[error(
        "tabulated recovery tail ends at {grid_end} with positive mass but time {t} was requested"
    )]
    Horizon { t: f64, grid_end: f64 },

    #[error("{what} at t = {at} is not a grid node (step {step})")]
    GridAlignment {
        what: &'static str,
        at: f64,
        step: f64,
    },

    #[error("fixed-point iteration did not converge at node {node} (t = {t}) after {iterations} iterations")]
    NonConvergence {
        node: usize,
        t: f64,
        iterations: usize,
    },

    #[error("effective rate is singular at t = {t}: neighbour survival vanished")]
    Singular { t: f64 },

    #[error("no interior root of the stationary equation in ({lo}, {hi}]")]
    NoInteriorRoot { lo: f64, hi: f64 },

    #[error("numerical consistency violated: {0}")]
    Consistency(String),

    #[error("unsupported kernel pair: {0}")]
    UnsupportedKernel(String),

    #[error("solution left the admissible range at node {node}: {reason}")]
    Underflow { node: usize, reason: &'static str },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
