//! Barycenters, circumcenters and boundary-map extensions on hyperbolic
//! space, in the hyperboloid model.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extension;
pub mod geometry;
pub mod hull;
pub mod lorentz;
pub mod measure;
pub mod moebius;
pub mod sample;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{BoundaryDirection, ModelConfig, SpacePoint, UnitTangent};
pub use lorentz::Lorentz;
pub use measure::{BoundaryMeasure, DiscreteMeasure, SpaceMeasure, TangentMeasure};
pub use solver::{Exponent, ObjectiveSpec, SolverConfig, SolverResult};
