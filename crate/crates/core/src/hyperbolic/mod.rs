//! Upper and lower estimates of Kobayashi distances.
//!
//! Normalization: the unit-disc density at the origin is 1, so
//! `d(0, r) = artanh(r)`.

mod chain;
mod density;
mod path;
mod polydisc;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::C64;

pub use chain::{chain_distance_to_s, ChainCandidate, ChainContext, ChainOptions, ChainResult, OriginDistances, SliceChainBatch};
pub use density::{distance_transform, DensityField};
pub use path::{dijkstra, projection_lower, slice_distance, PathResult, ANISOTROPY};
pub use polydisc::{polydisc_distance_4d, Grid4, Mask4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SliceGraph,
    Chain,
    Polydisc4d,
    ClosedForm,
    Projection,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::SliceGraph => "slice-graph",
            Method::Chain => "chain",
            Method::Polydisc4d => "polydisc-4d",
            Method::ClosedForm => "closed-form",
            Method::Projection => "projection",
        };
        f.write_str(s)
    }
}

/// A `(lower, upper)` bracket with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    /// Grid resolution used; 0 for closed forms.
    pub resolution: usize,
    pub note: String,
}

impl DistanceEstimate {
    pub fn exact(value: f64) -> Self {
        Self { lower: value, upper: value, method: Method::ClosedForm, resolution: 0, note: String::new() }
    }

    pub fn zero(method: Method, resolution: usize) -> Self {
        Self { lower: 0.0, upper: 0.0, method, resolution, note: String::new() }
    }
}

/// Poincaré distance on the unit disc, `artanh` of the pseudo-hyperbolic distance.
pub fn disc_distance(r1: C64, r2: C64) -> Result<DistanceEstimate> {
    if !(r1.norm() < 1.0 && r2.norm() < 1.0) {
        return Err(Error::OutOfDomain(format!("{r1} or {r2} not in the unit disc")));
    }
    Ok(DistanceEstimate::exact(pseudo_hyperbolic(r1, r2).atanh()))
}

/// `|a - b| / |1 - a conj(b)|`.
pub fn pseudo_hyperbolic(a: C64, b: C64) -> f64 {
    let num = (a - b).norm();
    if num == 0.0 {
        return 0.0;
    }
    (num / (C64::new(1.0, 0.0) - a * b.conj()).norm()).min(1.0)
}

/// Distance in the disc `D(0, rho)`; a lower bound on any subdomain.
pub fn disc_distance_radius(a: C64, b: C64, rho: f64) -> f64 {
    pseudo_hyperbolic(a / rho, b / rho).atanh()
}
