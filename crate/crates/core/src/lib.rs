//! Deep image prior with a steered network input for linear inverse problems.

pub mod baselines;
pub mod engine;
pub mod error;
pub mod generator;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod operators;
pub mod steering;

pub use error::{Error, Result};
pub use grid::ImageGrid;
