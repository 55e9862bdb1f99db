//! Added-mass boundary elements, zero-impulse swimming dynamics and Lie-bracket
//! control for a deformable body immersed in an ideal fluid.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: densities, deformation fields, the deformation map `Θ_s`,
//!   ball quadrature and icosphere meshing of the deformed interface.
//! - [`potential`]: direct boundary-element solver for the exterior Neumann problem,
//!   added-mass and coupling matrices, the ellipsoid oracle and rigid transport.
//! - [`dynamics`]: mass models, the RKMK4 integrator on SO(3)×R³×Rⁿ and the
//!   self-propelled constraint machinery.
//! - [`control`]: control vector fields, Lie brackets, rank tests and the
//!   tracking planner.

pub mod control;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod potential;
pub mod so3;

pub use error::{Error, Result};
