//! Desk-scale laboratory for X-ray transforms, fractional Laplacians,
//! nonlocal Calderón problems and travel-time tomography on radial
//! sound-speed profiles.
//!
//! The runnable programs under `examples/` are the intended entry point;
//! each one walks through a single capability.

pub mod calderon;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod fractional;
pub mod geodesic;
pub mod io;
pub mod linalg;
pub mod partialdata;
pub mod spectral;
pub mod vectorfield;
pub mod xray;

pub use error::{Error, Result};
pub use fields::{GridSpec, RegionMask, ScalarField, VectorField};
