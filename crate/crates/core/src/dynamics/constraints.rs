use crate::geometry::{
    bump_library, check_diffeo, restriction_gram_min_eigenvalue, rigid_shell_basis, BallQuadrature, DeformationField, DensityField, FieldTerm,
    ShapeCoords, SwimmerConfig,
};
use crate::so3::{dexp_inv, exp};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the freeness kicks in [`rectify_fields`].
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Threshold on the normalised Gram eigenvalue used as the freeness surrogate.
pub const GRAM_THRESHOLD: f64 = 1e-8;

/// Largest norms of `∫ϱΘ_t` and `∫ϱ ∂_tΘ_t × Θ_t` over a time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResiduals {
    pub first_moment: f64,
    pub angular: f64,
}

fn fd_step(times: &[f64]) -> f64 {
    let span = times.last().copied().unwrap_or(1.0) - times.first().copied().unwrap_or(0.0);
    1e-4 * span.abs().max(1.0)
}

/// Residuals of the self-propelled constraints along a shape path `t ↦ s(t)`;
/// `ṡ` by fourth-order central differences.
pub fn check_constraints(config: &SwimmerConfig, path: &dyn Fn(f64) -> ShapeCoords, times: &[f64], quad: &BallQuadrature) -> ConstraintResiduals {
    let table = config.moments(quad);
    let h = fd_step(times);
    let mut out = ConstraintResiduals { first_moment: 0.0, angular: 0.0 };
    for &t in times {
        let s = path(t);
        let sdot = (8.0 * (path(t + h) - path(t - h)) - (path(t + 2.0 * h) - path(t - 2.0 * h))) / (12.0 * h);
        out.first_moment = out.first_moment.max(table.first_moment(&s).norm());
        out.angular = out.angular.max(table.angular_residual(&s, &sdot).norm());
    }
    out
}

struct NodeState {
    theta: Vec<Vector3<f64>>,
    dtheta: Vec<Vector3<f64>>,
}

fn node_state(path: &dyn Fn(f64) -> DeformationField, t: f64, h: f64, quad: &BallQuadrature) -> NodeState {
    let fields = [path(t - 2.0 * h), path(t - h), path(t), path(t + h), path(t + 2.0 * h)];
    let mut theta = Vec::with_capacity(quad.len());
    let mut dtheta = Vec::with_capacity(quad.len());
    for x in &quad.nodes {
        let v: Vec<Vector3<f64>> = fields.iter().map(|f| f.value(x)).collect();
        theta.push(x + v[2]);
        dtheta.push((8.0 * (v[3] - v[1]) - (v[4] - v[0])) / (12.0 * h));
    }
    NodeState { theta, dtheta }
}

/// Residuals of the self-propelled constraints along a deformation path `t ↦ ϑ_t`.
pub fn check_path_constraints(
    density: &DensityField,
    path: &dyn Fn(f64) -> DeformationField,
    times: &[f64],
    quad: &BallQuadrature,
) -> ConstraintResiduals {
    let h = fd_step(times);
    let rho: Vec<f64> = quad.nodes.iter().zip(&quad.weights).map(|(x, w)| w * density.evaluate(x)).collect();
    let mut out = ConstraintResiduals { first_moment: 0.0, angular: 0.0 };
    for &t in times {
        let ns = node_state(path, t, h, quad);
        let mut first = Vector3::zeros();
        let mut ang = Vector3::zeros();
        for q in 0..quad.len() {
            first += rho[q] * ns.theta[q];
            ang += rho[q] * ns.dtheta[q].cross(&ns.theta[q]);
        }
        out.first_moment = out.first_moment.max(first.norm());
        out.angular = out.angular.max(ang.norm());
    }
    out
}

/// Self-propelled correction of a deformation path: the recentred path
/// `Θ̃_t = Θ_t − r(t)`, `r = (1/m)∫ϱΘ_t`, re-oriented by `R(t)` solving
/// `Ṙ = R·Ĝ`, `G = I(Θ̃_t)⁻¹ ∫ϱ ∂_tΘ̃_t × Θ̃_t`, `R(0) = Id`.
pub struct SelfPropelledProjection<'a> {
    density: DensityField,
    path: &'a dyn Fn(f64) -> DeformationField,
    quad: BallQuadrature,
    rho: Vec<f64>,
    mass: f64,
    h: f64,
    times: Vec<f64>,
    rotations: Vec<Matrix3<f64>>,
}

impl<'a> SelfPropelledProjection<'a> {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rotations(&self) -> &[Matrix3<f64>] {
        &self.rotations
    }

    /// Centre of mass `r(t)` of the uncorrected path.
    pub fn center(&self, t: f64) -> Vector3<f64> {
        let f = (self.path)(t);
        let mut c = Vector3::zeros();
        for (q, x) in self.quad.nodes.iter().enumerate() {
            c += self.rho[q] * (x + f.value(x));
        }
        c / self.mass
    }

    fn angular_rate(&self, t: f64) -> Result<Vector3<f64>> {
        let ns = node_state(self.path, t, self.h, &self.quad);
        let mut r = Vector3::zeros();
        let mut rdot = Vector3::zeros();
        for q in 0..self.quad.len() {
            r += self.rho[q] * ns.theta[q];
            rdot += self.rho[q] * ns.dtheta[q];
        }
        r /= self.mass;
        rdot /= self.mass;
        let mut inertia = Matrix3::zeros();
        let mut b = Vector3::zeros();
        for q in 0..self.quad.len() {
            let th = ns.theta[q] - r;
            let dth = ns.dtheta[q] - rdot;
            inertia += self.rho[q] * (Matrix3::identity() * th.norm_squared() - th * th.transpose());
            b += self.rho[q] * dth.cross(&th);
        }
        let inv = inertia.try_inverse().ok_or(Error::InvalidInput("inertia tensor is singular".into()))?;
        Ok(inv * b)
    }

    fn advance(&self, r0: &Matrix3<f64>, t0: f64, h: f64) -> Result<Matrix3<f64>> {
        if h == 0.0 {
            return Ok(*r0);
        }
        let g1 = self.angular_rate(t0)?;
        let gm = self.angular_rate(t0 + 0.5 * h)?;
        let g4 = self.angular_rate(t0 + h)?;
        let k1 = g1;
        let k2 = dexp_inv(&(k1 * 0.5 * h), &gm);
        let k3 = dexp_inv(&(k2 * 0.5 * h), &gm);
        let k4 = dexp_inv(&(k3 * h), &g4);
        Ok(r0 * exp(&((k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0))))
    }

    /// `R(t)`, by one RKMK4 step from the nearest earlier grid time.
    pub fn rotation(&self, t: f64) -> Result<Matrix3<f64>> {
        let k = self.times.partition_point(|s| *s <= t).saturating_sub(1);
        self.advance(&self.rotations[k], self.times[k], t - self.times[k])
    }

    /// Corrected field `ϑ*_t = ϑ_t + χ(R(t)(x + ϑ_t − r(t)) − x − ϑ_t)`,
    /// equal to `R(t)Θ̃_t − Id` on the ball.
    pub fn field(&self, t: f64) -> Result<DeformationField> {
        let base = (self.path)(t);
        let rotation = self.rotation(t)?;
        let shift = self.center(t);
        Ok(base.plus(&DeformationField::from_term(FieldTerm::Reframe { rotation, shift, base: base.clone() })))
    }

    /// Residuals of the corrected path on the grid.
    pub fn residuals(&self) -> ConstraintResiduals {
        let corrected = |t: f64| self.field(t).unwrap_or_default();
        check_path_constraints(&self.density, &corrected, &self.times, &self.quad)
    }
}

/// Builds the self-propelled correction of `path` on the time grid `times`.
pub fn project_self_propelled<'a>(
    density: &DensityField,
    path: &'a dyn Fn(f64) -> DeformationField,
    times: &[f64],
    quad: &BallQuadrature,
) -> Result<SelfPropelledProjection<'a>> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("time grid must be non-empty and strictly increasing".into()));
    }
    let rho: Vec<f64> = quad.nodes.iter().zip(&quad.weights).map(|(x, w)| w * density.evaluate(x)).collect();
    let mass = rho.iter().sum();
    let mut proj = SelfPropelledProjection {
        density: density.clone(),
        path,
        quad: quad.clone(),
        rho,
        mass,
        h: fd_step(times),
        times: times.to_vec(),
        rotations: vec![Matrix3::identity()],
    };
    for w in times.windows(2) {
        let last = *proj.rotations.last().unwrap();
        // two sub-steps per grid interval
        let half = 0.5 * (w[1] - w[0]);
        let mid = proj.advance(&last, w[0], half)?;
        let next = proj.advance(&mid, w[0] + half, half)?;
        proj.rotations.push(next);
    }
    Ok(proj)
}

/// Adds interior corrections (combinations of the fixed bump library, which
/// vanish on `Σ`) to each movement field in turn so that
/// `∫ϱV* = 0`, `∫ϱ V*⊗Θ = 0` (hence `∫ϱΘ×V* = 0`, `∫ϱΘ·V* = 0` and a
/// shape-stationary inertia tensor) and `∫ϱ V*_k × V*_i = 0` for `k < i`.
pub fn rectify_fields(density: &DensityField, base: &DeformationField, traces: &[DeformationField], quad: &BallQuadrature) -> Result<SwimmerConfig> {
    rectify_fields_seeded(density, base, traces, quad, DEFAULT_SEED)
}

/// [`rectify_fields`] with an explicit seed for the freeness kicks.
pub fn rectify_fields_seeded(
    density: &DensityField,
    base: &DeformationField,
    traces: &[DeformationField],
    quad: &BallQuadrature,
    seed: u64,
) -> Result<SwimmerConfig> {
    if check_diffeo(base) <= 0.0 {
        return Err(Error::InvalidInput("base deformation is not a diffeomorphism".into()));
    }
    let nodes = &quad.nodes;
    let rho: Vec<f64> = nodes.iter().zip(&quad.weights).map(|(x, w)| w * density.evaluate(x)).collect();
    let theta: Vec<Vector3<f64>> = nodes.iter().map(|x| x + base.value(x)).collect();
    let centre = theta.iter().zip(&rho).fold(Vector3::zeros(), |a, (t, r)| a + *r * t);
    let mass: f64 = rho.iter().sum();
    let scale = mass * theta.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if centre.norm() > 1e-10 * scale.max(1.0) {
        return Err(Error::BaseNotCentered { norm: centre.norm() });
    }
    let library = bump_library();
    let lib_vals: Vec<Vec<Vector3<f64>>> = library.iter().map(|f| nodes.iter().map(|x| f.value(x)).collect()).collect();

    let moments = |vals: &[Vector3<f64>], done: &[Vec<Vector3<f64>>]| -> Vec<f64> {
        let mut first = Vector3::zeros();
        let mut outer = Matrix3::zeros();
        let mut cross = vec![Vector3::zeros(); done.len()];
        for q in 0..vals.len() {
            first += rho[q] * vals[q];
            outer += rho[q] * vals[q] * theta[q].transpose();
            for (k, d) in done.iter().enumerate() {
                cross[k] += rho[q] * d[q].cross(&vals[q]);
            }
        }
        let mut row: Vec<f64> = first.iter().copied().collect();
        for i in 0..3 {
            for j in 0..3 {
                row.push(outer[(i, j)]);
            }
        }
        for c in cross {
            row.extend(c.iter());
        }
        row
    };

    let mut out: Vec<DeformationField> = Vec::with_capacity(traces.len());
    let mut done_vals: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(traces.len());
    for (i, v) in traces.iter().enumerate() {
        let vals: Vec<Vector3<f64>> = nodes.iter().map(|x| v.value(x)).collect();
        let cols: Vec<Vec<f64>> = lib_vals.iter().map(|lv| moments(lv, &done_vals)).collect();
        let rows = cols[0].len();
        let a = DMatrix::from_fn(rows, library.len(), |r, c| cols[c][r]);
        let rhs = -DVector::from_vec(moments(&vals, &done_vals));
        let (mut coeffs, kernel) = min_norm_solve(&a, &rhs)?;
        // round-off entries only cost evaluations
        let cmax = coeffs.amax();
        coeffs.iter_mut().filter(|c| c.abs() <= 1e-13 * cmax).for_each(|c| *c = 0.0);
        let residual = (&a * &coeffs - &rhs).norm();
        if residual > 1e-10 * (1.0 + rhs.norm()) {
            return Err(Error::CorrectionBasisDeficient { residual });
        }
        let mut corrected = v.plus(&DeformationField::linear_combination(coeffs.as_slice(), &library));
        let mut trial = out.clone();
        trial.push(corrected.clone());
        if kernel.ncols() > 0 && restriction_gram_min_eigenvalue(&trial, quad) < GRAM_THRESHOLD {
            // move inside the kernel of the moment map until the restrictions are free
            // smallest kick first: a large one costs admissible shape range
            // and stay in the field's reflection-parity class so that later fields
            // keep their symmetric moment structure
            let kernel = match reflection_parity(&corrected, nodes) {
                Some(sig) => {
                    let allowed: Vec<usize> = (0..library.len()).filter(|&l| reflection_parity(&library[l], nodes) == Some(sig)).collect();
                    let sub = DMatrix::from_fn(rows, allowed.len(), |r, c| a[(r, allowed[c])]);
                    let (_, ks) = min_norm_solve(&sub, &DVector::zeros(rows))?;
                    if ks.ncols() > 0 {
                        let mut full = DMatrix::zeros(library.len(), ks.ncols());
                        for (c, &l) in allowed.iter().enumerate() {
                            full.set_row(l, &ks.row(c));
                        }
                        full
                    } else {
                        kernel
                    }
                }
                None => kernel,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            for size in [1e-3, 1e-3, 1e-2, 1e-2, 5e-2, 5e-2, 5e-2, 5e-2] {
                let z = DVector::from_fn(kernel.ncols(), |_, _| rng.random_range(-1.0..1.0));
                let step = &kernel * z;
                let step = &step * (size * (1.0 + coeffs.norm()) / step.norm());
                let candidate = corrected.plus(&DeformationField::linear_combination(step.as_slice(), &library));
                trial.pop();
                trial.push(candidate.clone());
                if restriction_gram_min_eigenvalue(&trial, quad) >= GRAM_THRESHOLD {
                    corrected = candidate;
                    break;
                }
            }
        }
        done_vals.push(nodes.iter().map(|x| corrected.value(x)).collect());
        out.push(corrected);
    }
    Ok(SwimmerConfig::new(density.clone(), base.clone(), out))
}

/// Even (`true`) or odd behaviour of `V` under each coordinate reflection
/// `x ↦ Pₐx`, `V ↦ PₐV∘Pₐ`; `None` when some reflection has no definite parity.
fn reflection_parity(field: &DeformationField, nodes: &[Vector3<f64>]) -> Option<[bool; 3]> {
    let vals: Vec<Vector3<f64>> = nodes.iter().map(|x| field.value(x)).collect();
    let scale = vals.iter().map(|v| v.amax()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut sig = [true; 3];
    for a in 0..3 {
        let (mut even, mut odd) = (0.0f64, 0.0f64);
        for (x, v) in nodes.iter().zip(&vals) {
            let mut px = *x;
            px[a] = -px[a];
            let mut w = field.value(&px);
            w[a] = -w[a];
            even = even.max((v - w).amax());
            odd = odd.max((v + w).amax());
        }
        if even <= 1e-10 * scale {
            sig[a] = true;
        } else if odd <= 1e-10 * scale {
            sig[a] = false;
        } else {
            return None;
        }
    }
    Some(sig)
}

/// Minimum-norm least-squares solution of `a·c = rhs` and an orthonormal
/// basis of the kernel of `a`.
fn min_norm_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa.svd().map_err(|e| Error::InvalidInput(format!("{e:?}")))?;
    let (u, v, sv) = (svd.U(), svd.V(), svd.S().column_vector());
    let k = m.min(n);
    let smax = (0..k).map(|i| sv[i]).fold(0.0, f64::max);
    let rank = (0..k).filter(|&i| sv[i] > 1e-7 * smax).count();
    let mut c = DVector::zeros(n);
    for i in 0..rank {
        let coef = (0..m).map(|r| u[(r, i)] * rhs[r]).sum::<f64>() / sv[i];
        for j in 0..n {
            c[j] += coef * v[(j, i)];
        }
    }
    let kernel = DMatrix::from_fn(n, n - rank, |j, i| v[(j, rank + i)]);
    Ok((c, kernel))
}

/// Rectified canonical rigid-shell configuration with the first `count` fields.
pub fn rigid_shell_config(density: &DensityField, base: &DeformationField, count: usize, quad: &BallQuadrature) -> Result<SwimmerConfig> {
    rigid_shell_config_seeded(density, base, count, quad, DEFAULT_SEED)
}

pub fn rigid_shell_config_seeded(density: &DensityField, base: &DeformationField, count: usize, quad: &BallQuadrature, seed: u64) -> Result<SwimmerConfig> {
    if count > 6 {
        return Err(Error::InvalidInput(format!("at most six rigid-shell fields, got {count}")));
    }
    rectify_fields_seeded(density, base, &rigid_shell_basis(base)[..count], quad, seed)
}
