//! Hyperbolic-to-elliptic transitions in first-order quasi-linear systems.
//!
//! The crate classifies a system linearized around a reference solution by
//! its transition type (degeneracy index ℓ ∈ {0, 1/2, 1}), computes the
//! branching data and growth envelopes, integrates the symbolic flow and
//! checks it against Airy/exponential bounds, and runs semiclassical
//! wave-packet experiments exhibiting Hadamard instability.

pub mod airy;
pub mod branching;
pub mod classifier;
pub mod error;
pub mod linalg;
pub mod pde_sim;
pub mod registry;
pub mod semiclassical;
pub mod symbolic_flow;
pub mod system_model;

pub use error::{HypError, Result};
pub use linalg::{CMat, RMat, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
