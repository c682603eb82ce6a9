use thiserror::Error;

pub type Result<T> = std::result::Result<T, MslabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MslabError {
    /// Evaluation point outside the closed disk or on the boundary spectrum.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A quadrature node sits too close to a singular point; re-offset the grid.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("no convergence after {iterations} iterations (last estimate {estimate:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),
}
