//! Construction and numerical certification of a line-free (1,1)-hyperbolic
//! surface asymptotic to a pair of cones, with the supporting quadric
//! geometry.
//!
//! The quadric, Gauss-map, support-field and counting modules are generic over
//! [`Real`] (`f32` or `f64`); the strip, gluing/smoothing and line search work
//! in `f64`. Aliases for both precisions are provided below.

pub mod arnoldcount;
pub mod certificate;
pub mod error;
pub mod gaussmap;
pub mod glue_smooth;
pub mod linalg;
pub mod linefree;
pub mod ode;
pub mod pipeline;
pub mod quadforms;
pub mod scalar;
pub mod strip;
pub mod supportgeo;

pub use certificate::{Certificate, Status};
pub use error::{Error, Result};
pub use scalar::Real;

pub type QuadraticForm64 = quadforms::QuadraticForm<f64>;
pub type QuadraticForm32 = quadforms::QuadraticForm<f32>;
pub type SupportField64 = supportgeo::SupportField<f64>;
pub type SupportField32 = supportgeo::SupportField<f32>;
pub type SurfaceSampleSet64 = gaussmap::SurfaceSampleSet<f64>;
pub type SurfaceSampleSet32 = gaussmap::SurfaceSampleSet<f32>;
pub type RolleField64 = gaussmap::RolleField<f64>;
pub type RolleField32 = gaussmap::RolleField<f32>;
pub type HomogeneousQuadric64 = arnoldcount::HomogeneousQuadric<f64>;
pub type HomogeneousQuadric32 = arnoldcount::HomogeneousQuadric<f32>;
pub type ProjectiveLine64 = arnoldcount::ProjectiveLine<f64>;
pub type ProjectiveLine32 = arnoldcount::ProjectiveLine<f32>;
