//! Local depth functions, their tau-approximation of densities and
//! mode-ascent clustering based on local depth.

pub mod clustering;
pub mod constants;
pub mod data;
pub mod depth;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod recipes;
pub mod rng;
pub mod stats;
pub mod validate;

pub use constants::{ConstantsBudget, ConstantsCache, GeometryConstants};
pub use data::Dataset;
pub use depth::{DepthConfig, DepthResult, EstimatorKind, SimplexBudget};
pub use error::{Error, Result};
pub use geometry::{Family, RegionSpec};
