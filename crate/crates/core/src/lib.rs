//! Basins, stable manifolds and hyperbolic distance estimates for polynomial skew products.

pub mod class_a;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hyperbolic;
pub mod par;
pub mod poly;
pub mod preimage;
pub mod render;
pub mod roots;
pub mod skew;
pub mod stable;

pub use error::{Error, Result};
pub use poly::{BivarPoly, ComplexPoly, C64};
pub use skew::SkewProduct;
