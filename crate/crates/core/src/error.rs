//! Library-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Structural problems with a coupling graph. Node and edge indices in
/// messages are 1-based, matching scenario files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("network has no oscillators")]
    Empty,
    #[error("edge references node {node} but the network has {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-coupling edge on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate edge {to} <- {from}")]
    DuplicateEdge { to: usize, from: usize },
    #[error("node {node} is unbalanced: in-degree {in_degree}, out-degree {out_degree}")]
    Unbalanced {
        node: usize,
        in_degree: usize,
        out_degree: usize,
    },
    #[error(
        "phase antisymmetry violated between nodes {a} and {b}: \
         residual {residual_deg:.6} deg"
    )]
    PhaseAntisymmetry {
        a: usize,
        b: usize,
        residual_deg: f64,
    },
    #[error(
        "cycle through edge {to} <- {from} has phase residual {residual_deg:.6} deg \
         (phase sums around every cycle must vanish mod 360)"
    )]
    InconsistentCycle {
        to: usize,
        from: usize,
        residual_deg: f64,
    },
    #[error("node {node} is not connected to node 1")]
    Disconnected { node: usize },
}

/// Top-level error for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("coupling topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("coupling matrices are stale: rebuilt phases or amplitudes differ from the supplied network")]
    StaleMatrices,
    #[error("pitch angle {pitch_deg:.2} deg is inside the Euler singularity guard band")]
    GimbalLock { pitch_deg: f64 },
    #[error("non-finite value produced by {subsystem} at t = {t:.6} s")]
    NonFinite { subsystem: &'static str, t: f64 },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for domain-validation failures.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
