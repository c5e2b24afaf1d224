//! Sparse block models of directed link data with node text.

pub mod corpus;
pub mod crp2d;
pub mod error;
pub mod eval;
pub mod export;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod synthgen;

pub use error::{Error, Result};
pub use par::Execution;
