//! Random holomorphic dynamics on complex surfaces: skew products, Lyapunov
//! analysis, charts, suspension flows, jets and lattice arithmetic.

pub mod charts;
pub mod cocycle;
pub mod cohomology;
pub mod experiments;
pub mod error;
pub mod exact;
pub mod flow;
pub mod jets;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod orbit;
pub mod walk;

pub use error::{Error, Result};
