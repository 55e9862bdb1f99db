use super::RigidVelocity;
use crate::geometry::{surface_mesh, BallQuadrature, MomentTable, ShapeCoords, SwimmerConfig};
use crate::potential::{boundary_mass, transport_added_mass, MassMatrices};
use crate::so3::exp;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3};

/// Boundary motion generated by one shell-rigid shape coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellRole {
    /// Rotation of the shell about `e_axis`.
    Rotation(usize),
    /// Translation of the shell along `e_axis`.
    Translation(usize),
}

impl ShellRole {
    /// Roles of the canonical rigid-shell basis: three rotations, then three translations.
    pub fn canonical(n: usize) -> Vec<ShellRole> {
        assert!(n <= 6, "at most six rigid-shell coordinates");
        (0..n)
            .map(|i| if i < 3 { ShellRole::Rotation(i) } else { ShellRole::Translation(i - 3) })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum InertiaModel {
    /// Shape-independent inertia (abstract parameter studies).
    Constant(Matrix3<f64>),
    /// Exact polynomial dependence on `s` from the moment table.
    Moments(MomentTable),
}

/// Mass model for shape coordinates whose boundary trace is a rigid motion of
/// the reference interface: `Σ_s = R_s Θ(Σ) + τ_s` with
/// `R_s = Π exp(sⱼ ê_{aⱼ})` over rotation roles (in order) and `τ_s = Σ sⱼ e_{aⱼ}`
/// over translation roles. `M_f` follows by rigid transport and the coupling is
/// `N = M_f·G(s)`, where column `j` of `G` is the rigid velocity generated by `∂_{sⱼ}`.
#[derive(Debug, Clone)]
pub struct ShellRigidModel {
    pub added_mass: Matrix6<f64>,
    pub roles: Vec<ShellRole>,
    pub inertia: InertiaModel,
    pub mass: f64,
    pub config: Option<SwimmerConfig>,
}

impl ShellRigidModel {
    /// Abstract model with `M_f⋄ = diag(μ)`, constant inertia `diag(I)` and mass `m`.
    pub fn parametric(inertia: [f64; 3], mass: f64, mu: [f64; 6], n: usize) -> Self {
        Self {
            added_mass: Matrix6::from_diagonal(&mu.into()),
            roles: ShellRole::canonical(n),
            inertia: InertiaModel::Constant(Matrix3::from_diagonal(&inertia.into())),
            mass,
            config: None,
        }
    }

    /// Physical model for a configuration whose movements are the canonical
    /// (rectified) rigid-shell fields.
    pub fn from_config(config: &SwimmerConfig, added_mass: Matrix6<f64>, quad: &BallQuadrature) -> Self {
        let moments = config.moments(quad);
        Self {
            added_mass,
            roles: ShellRole::canonical(config.n()),
            mass: moments.mass,
            inertia: InertiaModel::Moments(moments),
            config: Some(config.clone()),
        }
    }

    /// `(R_s, τ_s, G(s))`.
    pub fn shell_motion(&self, s: &ShapeCoords) -> (Matrix3<f64>, Vector3<f64>, DMatrix<f64>) {
        let tau = self
            .roles
            .iter()
            .zip(s.iter())
            .filter_map(|(r, si)| match r {
                ShellRole::Translation(a) => Some(Vector3::ith(*a, *si)),
                _ => None,
            })
            .fold(Vector3::zeros(), |acc, v| acc + v);
        let mut rot = Matrix3::identity();
        let mut g = DMatrix::zeros(6, self.roles.len());
        for (j, (role, sj)) in self.roles.iter().zip(s.iter()).enumerate() {
            match role {
                ShellRole::Rotation(a) => {
                    let omega = rot.column(*a).into_owned();
                    let v = -omega.cross(&tau);
                    g.fixed_view_mut::<3, 1>(0, j).copy_from(&omega);
                    g.fixed_view_mut::<3, 1>(3, j).copy_from(&v);
                    rot *= exp(&Vector3::ith(*a, *sj));
                }
                ShellRole::Translation(a) => {
                    g[(3 + a, j)] = 1.0;
                }
            }
        }
        (rot, tau, g)
    }

    pub fn evaluate(&self, s: &ShapeCoords) -> MassMatrices {
        let (r, tau, g) = self.shell_motion(s);
        let mf = transport_added_mass(&self.added_mass, &r, &tau);
        let coupling = DMatrix::from_fn(6, 6, |i, j| mf[(i, j)]) * g;
        let inertia = match &self.inertia {
            InertiaModel::Constant(i) => *i,
            InertiaModel::Moments(t) => t.inertia(s),
        };
        MassMatrices { inertia, mass: self.mass, mf, coupling }
    }
}

/// Mass model that re-solves the boundary problems on the deformed interface.
#[derive(Debug, Clone)]
pub struct BoundaryModel {
    pub config: SwimmerConfig,
    pub refinement: usize,
    moments: MomentTable,
}

impl BoundaryModel {
    pub fn new(config: SwimmerConfig, refinement: usize, quad: &BallQuadrature) -> Self {
        let moments = config.moments(quad);
        Self { config, refinement, moments }
    }

    pub fn evaluate(&self, s: &ShapeCoords) -> Result<MassMatrices> {
        let mesh = surface_mesh(&self.config, s, self.refinement)?;
        let (mf, coupling) = boundary_mass(&mesh, &self.config, s)?;
        Ok(MassMatrices { inertia: self.moments.inertia(s), mass: self.moments.mass, mf, coupling })
    }
}

/// Source of `(M_r(s), N(s))` for the dynamics.
#[derive(Debug, Clone)]
pub enum MassModel {
    ShellRigid(ShellRigidModel),
    Boundary(BoundaryModel),
}

impl MassModel {
    pub fn n(&self) -> usize {
        match self {
            MassModel::ShellRigid(m) => m.roles.len(),
            MassModel::Boundary(m) => m.config.n(),
        }
    }

    pub fn config(&self) -> Option<&SwimmerConfig> {
        match self {
            MassModel::ShellRigid(m) => m.config.as_ref(),
            MassModel::Boundary(m) => Some(&m.config),
        }
    }

    pub fn evaluate(&self, s: &ShapeCoords) -> Result<MassMatrices> {
        if s.len() != self.n() {
            return Err(Error::InvalidInput(format!("shape vector has length {}, expected {}", s.len(), self.n())));
        }
        match self {
            MassModel::ShellRigid(m) => Ok(m.evaluate(s)),
            MassModel::Boundary(m) => m.evaluate(s),
        }
    }

    /// `X(s) = −M_r(s)⁻¹ N(s)` (6×n): column `i` is the rigid velocity driven by `ṡ = fᵢ`.
    pub fn connection(&self, s: &ShapeCoords) -> Result<DMatrix<f64>> {
        connection_of(&self.evaluate(s)?)
    }

    /// `(Ω; v) = −M_r⁻¹ N ṡ`.
    pub fn rigid_velocity(&self, s: &ShapeCoords, sdot: &DVector<f64>) -> Result<RigidVelocity> {
        Ok(RigidVelocity::from_stacked(&(self.connection(s)? * sdot)))
    }
}

pub(crate) fn connection_of(mm: &MassMatrices) -> Result<DMatrix<f64>> {
    let mr = mm.mr();
    let chol = mr.cholesky().ok_or(Error::MassMatrixSingular)?;
    let n = mm.coupling.ncols();
    let mut x = DMatrix::zeros(6, n);
    for j in 0..n {
        let col = nalgebra::Vector6::from_iterator(mm.coupling.column(j).iter().copied());
        x.set_column(j, &(-chol.solve(&col)));
    }
    Ok(x)
}
