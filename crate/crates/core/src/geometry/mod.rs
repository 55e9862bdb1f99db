//! Densities, deformation fields, the deformation map `Θ_s = Id + ϑ + Σ sᵢVᵢ`,
//! quadrature over the reference ball and meshing of the deformed interface.

mod config;
mod density;
mod field;
mod mesh;
mod quadrature;
mod shell;

pub use config::{check_diffeo, restriction_gram_min_eigenvalue, MomentTable, ShapeCoords, SwimmerConfig};
pub use density::DensityField;
pub use field::{cutoff, DeformationField, FieldTerm, CUTOFF_INNER, CUTOFF_OUTER};
pub use mesh::{icosphere, surface_mesh, SurfaceMesh};
pub use quadrature::{ball_quadrature, ball_quadrature_with, gauss_legendre, BallQuadrature, DEFAULT_ANGULAR_STRENGTH, DEFAULT_RADIAL_ORDER};
pub use shell::{bump_library, rigid_shell_basis, BUMP_LIBRARY_SIZE};
