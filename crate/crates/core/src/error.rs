use thiserror::Error;

use crate::region::SymbolSubset;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid distortion matrix: {0}")]
    InvalidDistortion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iters} iterations (last rate {last_rate}, last distortion {last_distortion})")]
    NonConvergence {
        iters: usize,
        last_rate: f64,
        last_distortion: f64,
    },

    #[error("guard exceeded: {what} = {value} (limit {limit})")]
    GuardExceeded {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("switch rule has no entry for available set {0}")]
    MissingRule(SymbolSubset),

    /// The target lies outside the attainable region; `subset` is a violated cut.
    #[error("target not attainable: subset {subset} has mass {lhs} < Q = {rhs}")]
    NotAttainable {
        subset: SymbolSubset,
        lhs: f64,
        rhs: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}
