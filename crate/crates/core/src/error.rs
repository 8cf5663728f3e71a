use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A time lies outside the interval on which the flow is defined, or the
    /// metric degenerates there.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The minimizing L-geodesic is numerically non-unique.
    #[error("endpoint pair is near the L-cut locus (competing lengths {0} and {1})")]
    NearCutLocus(f64, f64),

    #[error("conjugate point: Jacobian determinant changed sign ({0})")]
    ConjugatePoint(String),

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("non-finite cost entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("stability bound forces time step {0:e} below the minimum")]
    Stability(f64),

    #[error("density dipped to {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("density must be strictly positive (node {node} has {value:e})")]
    NonPositiveDensity { node: usize, value: f64 },

    #[error("distance field entry (node {node}, tau {tau}) is invalid")]
    InvalidFieldEntry { node: usize, tau: f64 },
}
