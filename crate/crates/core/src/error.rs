use thiserror::Error;

use crate::poly::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("root finder did not converge in {iterations} iterations (worst residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("leading w-coefficient of Q(z, .) vanishes at z = {z}")]
    DegreeDrop { z: C64 },

    #[error("resonance at order {order}: |b - a^{order}| = {gap:.3e}")]
    ResonanceDegeneracy { order: usize, gap: f64 },

    #[error("continuation passed within branch tolerance of a critical point at z = {z}")]
    BranchPointProximity { z: C64 },

    #[error("no stable graph reachable: {0}")]
    NoGraphReachable(String),

    #[error("point outside the domain: {0}")]
    OutOfDomain(String),

    #[error("points lie in different components")]
    Disconnected,

    #[error("escape-time shell {0} has no raster support")]
    ShellEmpty(u32),

    #[error("resource cap exceeded: {what} ({requested} > {limit})")]
    ResourceCap {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("{fraction:.2}% of cells undecided in the region of interest (limit 1%)")]
    TooManyUndecided { fraction: f64 },

    #[error("{fraction:.2}% of samples unresolved (limit 5%)")]
    TooManyUnresolved { fraction: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
