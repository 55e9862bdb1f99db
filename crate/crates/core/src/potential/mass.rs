use super::bem::BoundarySolver;
use crate::geometry::{BallQuadrature, DeformationField, DensityField, ShapeCoords, SurfaceMesh, SwimmerConfig};
use crate::so3::hat;
use crate::{Error, Result};
use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3};

/// Mass data of the body–fluid system at one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrices {
    pub inertia: Matrix3<f64>,
    pub mass: f64,
    /// Added mass `M_f` (6×6, symmetric).
    pub mf: Matrix6<f64>,
    /// Coupling `N` (6×n).
    pub coupling: DMatrix<f64>,
}

impl MassMatrices {
    /// `M_b = diag(I, m·Id)`.
    pub fn mb(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.inertia);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * self.mass));
        m
    }

    /// `M_r = M_b + M_f`.
    pub fn mr(&self) -> Matrix6<f64> {
        self.mb() + self.mf
    }
}

/// Neumann data of the six rigid modes, `(eᵢ × x)·n` and `eᵢ·n`, evaluated
/// at the anchor images on the exact interface.
pub fn rigid_fluxes(mesh: &SurfaceMesh) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(mesh.len()); 6];
    for (x, n) in mesh.anchor_images.iter().zip(&mesh.normals) {
        let xn = x.cross(n);
        for i in 0..3 {
            // (eᵢ × x)·n = eᵢ·(x × n)
            out[i].push(xn[i]);
            out[i + 3].push(n[i]);
        }
    }
    out
}

fn energy_matrix(mesh: &SurfaceMesh, potentials: &[Vec<f64>], fluxes: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(potentials.len(), fluxes.len(), |i, j| {
        potentials[i].iter().zip(&fluxes[j]).zip(&mesh.areas).map(|((p, g), a)| p * g * a).sum()
    })
}

fn rigid_potentials(solver: &BoundarySolver) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let fluxes = rigid_fluxes(solver.mesh());
    let sols = solver.solve_many(&fluxes)?;
    Ok((sols.into_iter().map(|s| s.potentials).collect(), fluxes))
}

/// Added-mass matrix before symmetrisation.
pub fn added_mass_raw(mesh: &SurfaceMesh) -> Result<Matrix6<f64>> {
    let solver = BoundarySolver::new(mesh.clone())?;
    let (psi, g) = rigid_potentials(&solver)?;
    Ok(Matrix6::from_iterator(energy_matrix(mesh, &psi, &g).iter().copied()))
}

/// Added-mass matrix `∫_Σ ψⁱ ∂_nψʲ dσ`, symmetrised.
pub fn added_mass_matrix(mesh: &SurfaceMesh) -> Result<Matrix6<f64>> {
    let m = added_mass_raw(mesh)?;
    Ok(0.5 * (m + m.transpose()))
}

fn movement_fluxes(mesh: &SurfaceMesh, config: &SwimmerConfig) -> Vec<Vec<f64>> {
    config
        .movements
        .iter()
        .map(|v| mesh.anchors.iter().zip(&mesh.normals).map(|(y, n)| v.value(y).dot(n)).collect())
        .collect()
}

/// Coupling matrix `∫_Σ ψⁱ (wʲ·n) dσ` with `wʲ = Vⱼ∘Θ_s⁻¹`. The mesh must
/// come from [`crate::geometry::surface_mesh`] for the same `(config, s)`.
pub fn coupling_matrix(mesh: &SurfaceMesh, config: &SwimmerConfig, s: &ShapeCoords) -> Result<DMatrix<f64>> {
    Ok(boundary_mass(mesh, config, s)?.1)
}

/// `(M_f, N)` from a single factorisation.
pub fn boundary_mass(mesh: &SurfaceMesh, config: &SwimmerConfig, s: &ShapeCoords) -> Result<(Matrix6<f64>, DMatrix<f64>)> {
    if s.len() != config.n() {
        return Err(Error::InvalidInput(format!("shape vector has length {}, expected {}", s.len(), config.n())));
    }
    let solver = BoundarySolver::new(mesh.clone())?;
    let (psi, g) = rigid_potentials(&solver)?;
    let mf = energy_matrix(mesh, &psi, &g);
    let mf = Matrix6::from_iterator(mf.iter().copied());
    let w = movement_fluxes(mesh, config);
    let n = energy_matrix(mesh, &psi, &w);
    Ok((0.5 * (mf + mf.transpose()), n))
}

/// `(I, m)` with `I = ∫ϱ(|Θ_s|²Id − Θ_s⊗Θ_s)` and `m = ∫ϱ`.
pub fn inertia_and_mass(config: &SwimmerConfig, s: &ShapeCoords, quad: &BallQuadrature) -> (Matrix3<f64>, f64) {
    let t = config.moments(quad);
    (t.inertia(s), t.mass)
}

/// Offset in the inertia-targeting family `ϱ = Σ_k a_k (ε + x_k²)`.
const FAMILY_OFFSET: f64 = 0.05;

/// Density from the three-parameter family `ϱ = Σ_k a_k (ε + x_k²)` whose
/// principal moments about the base shape equal `targets`.
pub fn density_for_inertia(base: &DeformationField, targets: [f64; 3], quad: &BallQuadrature) -> Result<DensityField> {
    let member = |k: usize| {
        let mut q = Matrix3::zeros();
        q[(k, k)] = 1.0;
        DensityField::Polynomial { constant: FAMILY_OFFSET, linear: Vector3::zeros(), quadratic: q }
    };
    let mut m = Matrix3::zeros();
    for k in 0..3 {
        let cfg = SwimmerConfig::new(member(k), base.clone(), vec![]);
        let (inertia, _) = inertia_and_mass(&cfg, &ShapeCoords::zeros(0), quad);
        for j in 0..3 {
            m[(j, k)] = inertia[(j, j)];
        }
    }
    let a = m
        .lu()
        .solve(&Vector3::from(targets))
        .ok_or(Error::InertiaTargetInfeasible { targets })?;
    let density = DensityField::Polynomial {
        constant: FAMILY_OFFSET * a.sum(),
        linear: Vector3::zeros(),
        quadratic: Matrix3::from_diagonal(&a),
    };
    // minimum over the closed ball of ε·Σa + Σ a_k x_k²
    let min = FAMILY_OFFSET * a.sum() + a.min().min(0.0);
    if min <= 0.0 || !density.is_positive(quad) {
        return Err(Error::InertiaTargetInfeasible { targets });
    }
    Ok(density)
}

/// Rigid transport of an added-mass matrix:
/// `[Id, τ̂; 0, Id]·diag(R, R)·M·diag(Rᵀ, Rᵀ)·[Id, 0; −τ̂, Id]`.
pub fn transport_added_mass(mf_ref: &Matrix6<f64>, r: &Matrix3<f64>, tau: &Vector3<f64>) -> Matrix6<f64> {
    let mut t = Matrix6::identity();
    t.fixed_view_mut::<3, 3>(0, 3).copy_from(&hat(tau));
    let mut d = Matrix6::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    d.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    let td = t * d;
    td * mf_ref * td.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_quadrature, rigid_shell_basis, surface_mesh};
    use crate::so3::exp;
    use nalgebra::{DVector, Vector6};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sphere() -> SwimmerConfig {
        SwimmerConfig::new(DensityField::Constant(1.0), DeformationField::zero(), vec![])
    }

    #[test]
    fn ball_inertia() {
        let q = ball_quadrature(16);
        let (i, m) = inertia_and_mass(&sphere(), &DVector::zeros(0), &q);
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((i - Matrix3::identity() * 8.0 * PI / 15.0).norm() < 1e-12);
    }

    #[test]
    fn ellipsoid_inertia_scaling() {
        let q = ball_quadrature(16);
        let cfg = SwimmerConfig::new(DensityField::Constant(1.0), DeformationField::ellipsoid(1.0, 0.8, 0.6), vec![]);
        let (i, m) = inertia_and_mass(&cfg, &DVector::zeros(0), &q);
        let axes = [1.0f64, 0.8, 0.6];
        for k in 0..3 {
            let others: f64 = (0..3).filter(|&j| j != k).map(|j| axes[j] * axes[j]).sum();
            assert!((i[(k, k)] - m * others / 5.0).abs() < 1e-12);
        }
        assert!((i - Matrix3::from_diagonal(&i.diagonal())).norm() < 1e-13);
    }

    #[test]
    fn inertia_targets_are_hit() {
        let q = ball_quadrature(16);
        let base = DeformationField::ellipsoid(1.0, 0.8, 0.6);
        let targets = [1.0, 1.3, 1.6];
        let rho = density_for_inertia(&base, targets, &q).unwrap();
        let cfg = SwimmerConfig::new(rho, base, vec![]);
        let (i, _) = inertia_and_mass(&cfg, &DVector::zeros(0), &q);
        for k in 0..3 {
            assert!((i[(k, k)] - targets[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn triangle_inequality_violation_is_infeasible() {
        let q = ball_quadrature(16);
        let r = density_for_inertia(&DeformationField::ellipsoid(1.0, 0.8, 0.6), [1.0, 2.0, 4.0], &q);
        assert!(matches!(r, Err(Error::InertiaTargetInfeasible { .. })));
    }

    #[test]
    fn transport_identity_and_quarter_turn() {
        let mf = Matrix6::from_diagonal(&Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6));
        assert_eq!(transport_added_mass(&mf, &Matrix3::identity(), &Vector3::zeros()), mf);
        let r = exp(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let t = transport_added_mass(&mf, &r, &Vector3::zeros());
        let expect = Matrix6::from_diagonal(&Vector6::new(0.2, 0.1, 0.3, 0.5, 0.4, 0.6));
        assert!((t - expect).norm() < 1e-15);
    }

    #[test]
    fn transport_preserves_rotational_spectrum() {
        let mf = Matrix6::from_fn(|i, j| 1.0 / (1.0 + i as f64 + j as f64)) + Matrix6::identity();
        let r = exp(&Vector3::new(0.3, -1.1, 0.7));
        let t = transport_added_mass(&mf, &r, &Vector3::zeros());
        let a = mf.fixed_view::<3, 3>(0, 0).into_owned().symmetric_eigenvalues();
        let b = t.fixed_view::<3, 3>(0, 0).into_owned().symmetric_eigenvalues();
        let (mut a, mut b) = (a.as_slice().to_vec(), b.as_slice().to_vec());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn transport_derivative_is_commutator() {
        let mf = Matrix6::from_diagonal(&Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6));
        let h = 1e-4;
        for i in 0..6 {
            let at = |t: f64| {
                let (r, tau) = if i < 3 {
                    (exp(&(Vector3::ith(i, t))), Vector3::zeros())
                } else {
                    (Matrix3::identity(), Vector3::ith(i - 3, t))
                };
                transport_added_mass(&mf, &r, &tau)
            };
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            let mut gen = Matrix6::zeros();
            if i < 3 {
                let e = hat(&Vector3::ith(i, 1.0));
                gen.fixed_view_mut::<3, 3>(0, 0).copy_from(&e);
                gen.fixed_view_mut::<3, 3>(3, 3).copy_from(&e);
            } else {
                gen.fixed_view_mut::<3, 3>(0, 3).copy_from(&hat(&Vector3::ith(i - 3, 1.0)));
            }
            let exact = gen * mf + mf * gen.transpose();
            assert!((fd - exact).norm() < 1e-8 * exact.norm().max(1.0), "field {i}");
        }
    }

    #[test]
    fn rotational_flux_vanishes_on_sphere() {
        let cfg = sphere();
        let mesh = surface_mesh(&cfg, &DVector::zeros(0), 2).unwrap();
        let g = rigid_fluxes(&mesh);
        for i in 0..3 {
            assert!(g[i].iter().all(|v| v.abs() < 0.05));
        }
    }

    #[test]
    fn coupling_reproduces_added_mass_for_rigid_shell() {
        let base = DeformationField::ellipsoid(1.0, 0.8, 0.6);
        let cfg = SwimmerConfig::new(DensityField::Constant(1.0), base.clone(), rigid_shell_basis(&base));
        let s = DVector::zeros(6);
        let mesh = surface_mesh(&cfg, &s, 2).unwrap();
        let (mf, n) = boundary_mass(&mesh, &cfg, &s).unwrap();
        let raw = added_mass_raw(&mesh).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((n[(i, j)] - raw[(i, j)]).abs() <= 1e-10 * raw[(i, j)].abs().max(1e-3 * mf.norm()));
            }
        }
    }

    #[test]
    fn tangential_movement_gives_zero_column() {
        // an interior bump has zero trace on Σ
        let cfg = SwimmerConfig::new(
            DensityField::Constant(1.0),
            DeformationField::zero(),
            vec![DeformationField::bump([1, 0, 0], 2), DeformationField::dilation(0.1)],
        );
        let s = DVector::zeros(2);
        let mesh = surface_mesh(&cfg, &s, 2).unwrap();
        let n = coupling_matrix(&mesh, &cfg, &s).unwrap();
        assert!(n.column(0).norm() < 1e-12);
    }
}
