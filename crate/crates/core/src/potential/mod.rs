//! Exterior Neumann problems for the elementary potentials, added-mass and
//! coupling matrices, the ellipsoid oracle and rigid transport of `M_f`.

mod bem;
mod ellipsoid;
mod mass;

pub use bem::{self_panel_potential, solve_exterior_neumann, BoundarySolution, BoundarySolver};
pub use ellipsoid::{ellipsoid_added_mass, ellipsoid_depolarization, gauss_kronrod_adaptive};
pub use mass::{
    added_mass_matrix, added_mass_raw, boundary_mass, coupling_matrix, density_for_inertia, inertia_and_mass, rigid_fluxes,
    transport_added_mass, MassMatrices,
};
