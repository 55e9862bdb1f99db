use super::{BallQuadrature, DeformationField, DensityField};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Shape coordinates `s ∈ Rⁿ`.
pub type ShapeCoords = DVector<f64>;

/// Swimmer configuration `(ϱ, ϑ, V₁..V_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwimmerConfig {
    pub density: DensityField,
    pub base: DeformationField,
    pub movements: Vec<DeformationField>,
}

/// Number of sample points along the segment `[0, s]` used to certify membership in `S(c)`.
const SEGMENT_SAMPLES: usize = 32;

impl SwimmerConfig {
    pub fn new(density: DensityField, base: DeformationField, movements: Vec<DeformationField>) -> Self {
        Self { density, base, movements }
    }

    pub fn n(&self) -> usize {
        self.movements.len()
    }

    /// `ϑ + Σ sᵢVᵢ`.
    pub fn deformation(&self, s: &ShapeCoords) -> DeformationField {
        assert_eq!(s.len(), self.n(), "shape vector length");
        self.base.plus(&DeformationField::linear_combination(s.as_slice(), &self.movements))
    }

    /// `Θ_s(x)`.
    pub fn eval_map(&self, s: &ShapeCoords, x: &Vector3<f64>) -> Vector3<f64> {
        let mut y = x + self.base.value(x);
        for (si, v) in s.iter().zip(&self.movements) {
            if *si != 0.0 {
                y += *si * v.value(x);
            }
        }
        y
    }

    fn map_and_gradient(&self, s: &ShapeCoords, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let (b, gb) = self.base.value_and_gradient(x);
        let mut y = x + b;
        let mut g = Matrix3::identity() + gb;
        for (si, v) in s.iter().zip(&self.movements) {
            if *si != 0.0 {
                let (vv, vg) = v.value_and_gradient(x);
                y += *si * vv;
                g += *si * vg;
            }
        }
        (y, g)
    }

    /// `(∇Θ_s(x), det ∇Θ_s(x))`; fails when the determinant is not positive.
    pub fn eval_jacobian(&self, s: &ShapeCoords, x: &Vector3<f64>) -> Result<(Matrix3<f64>, f64)> {
        let (_, g) = self.map_and_gradient(s, x);
        let det = g.determinant();
        if det <= 0.0 {
            return Err(Error::NonPositiveJacobian { det, x: x.x, y: x.y, z: x.z });
        }
        Ok((g, det))
    }

    /// `Θ_s⁻¹(y)` by damped Newton iteration started at `y`.
    pub fn inverse_map(&self, s: &ShapeCoords, y: &Vector3<f64>) -> Result<Vector3<f64>> {
        const MAX_ITER: usize = 50;
        let tol = 1e-12 * y.norm().max(1.0);
        let mut x = *y;
        let (mut fx, mut g) = self.map_and_gradient(s, &x);
        let mut res = (fx - y).norm();
        for _ in 0..MAX_ITER {
            if res <= tol {
                return Ok(x);
            }
            let Some(inv) = g.try_inverse() else { break };
            let dx = inv * (fx - y);
            let mut step = 1.0;
            loop {
                let xn = x - step * dx;
                let (fn_, gn) = self.map_and_gradient(s, &xn);
                let rn = (fn_ - y).norm();
                if rn < res || step < 1e-6 {
                    x = xn;
                    fx = fn_;
                    g = gn;
                    res = rn;
                    break;
                }
                step *= 0.5;
            }
        }
        if res <= tol {
            return Ok(x);
        }
        Err(Error::InverseMapDiverged { iterations: MAX_ITER, residual: res })
    }

    /// Density of the deformed body `ϱ(Θ_s⁻¹(y)) / J_s(Θ_s⁻¹(y))`.
    pub fn pushforward_density(&self, s: &ShapeCoords, y: &Vector3<f64>) -> Result<f64> {
        let x = self.inverse_map(s, y)?;
        let (_, det) = self.eval_jacobian(s, &x)?;
        Ok(self.density.evaluate(&x) / det)
    }

    /// Smallest diffeomorphism margin along the straight segment from `0` to `s`.
    pub fn certify_shape(&self, s: &ShapeCoords) -> f64 {
        let motion = DeformationField::linear_combination(s.as_slice(), &self.movements);
        (0..=SEGMENT_SAMPLES)
            .map(|k| {
                let t = k as f64 / SEGMENT_SAMPLES as f64;
                check_diffeo(&self.base.add_scaled(t, &motion))
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn moments(&self, quad: &BallQuadrature) -> MomentTable {
        MomentTable::new(self, quad)
    }

    /// Largest residual of the self-propelled moment conditions over all
    /// pairs drawn from `{Θ, V₁..V_n}`: `(first moments, cross moments)`.
    pub fn moment_residuals(&self, quad: &BallQuadrature) -> (f64, f64) {
        let t = self.moments(quad);
        let k = self.n() + 1;
        let first = (0..k).map(|a| t.first(a).norm()).fold(0.0, f64::max);
        let mut cross = 0.0f64;
        for a in 0..k {
            for b in a + 1..k {
                cross = cross.max(t.cross(a, b).norm());
            }
        }
        (first, cross)
    }
}

/// Diffeomorphism margin `inf ⟨(Id + ∇ϑ(x))e, e⟩` over a deterministic grid
/// covering the support ball and all unit directions.
pub fn check_diffeo(field: &DeformationField) -> f64 {
    if field.is_zero() {
        return 1.0;
    }
    const N: i32 = 24;
    let radius = field.support_radius().max(1.0);
    let h = 2.0 * radius / N as f64;
    let mut margin = f64::INFINITY;
    let mut probe = |x: &Vector3<f64>| {
        let g = Matrix3::identity() + field.gradient(x);
        let sym = 0.5 * (g + g.transpose());
        let lam = sym.symmetric_eigenvalues().min();
        margin = margin.min(lam);
    };
    for i in 0..=N {
        for j in 0..=N {
            for k in 0..=N {
                let x = Vector3::new(i as f64, j as f64, k as f64) * h - Vector3::repeat(radius);
                if x.norm() <= radius {
                    probe(&x);
                }
            }
        }
    }
    for v in super::icosphere(2).0 {
        probe(&v);
    }
    margin
}

/// Smallest eigenvalue of the normalised Gram matrix of the component
/// restrictions `{Vᵢ·e_k}` on the ball, sampled at the quadrature nodes.
pub fn restriction_gram_min_eigenvalue(fields: &[DeformationField], quad: &BallQuadrature) -> f64 {
    let k = 3 * fields.len();
    if k == 0 {
        return 1.0;
    }
    let mut samples = DMatrix::zeros(k, quad.len());
    for (i, f) in fields.iter().enumerate() {
        for (q, x) in quad.nodes.iter().enumerate() {
            let v = f.value(x) * quad.weights[q].sqrt();
            for c in 0..3 {
                samples[(3 * i + c, q)] = v[c];
            }
        }
    }
    let gram = &samples * samples.transpose();
    let d: Vec<f64> = (0..k).map(|i| gram[(i, i)]).collect();
    // a component at round-off level relative to its field counts as zero
    for i in 0..fields.len() {
        let total: f64 = d[3 * i..3 * i + 3].iter().sum();
        if d[3 * i..3 * i + 3].iter().any(|&x| x <= 1e-24 * total) || total == 0.0 {
            return 0.0;
        }
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (d[i] * d[j]).sqrt());
    scaled.symmetric_eigenvalues().min()
}

/// Density-weighted moments of `F₀ = Θ = Id + ϑ` and `Fᵢ = Vᵢ` on the ball:
/// `∫ϱ`, `∫ϱF_a` and `∫ϱ F_a⊗F_b`. Every quantity that is polynomial in `s`
/// (centre of mass, inertia, angular residual) follows exactly from these.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub mass: f64,
    first: Vec<Vector3<f64>>,
    outer: Vec<Matrix3<f64>>,
    k: usize,
}

impl MomentTable {
    pub fn new(config: &SwimmerConfig, quad: &BallQuadrature) -> Self {
        let k = config.n() + 1;
        let mut first = vec![Vector3::zeros(); k];
        let mut outer = vec![Matrix3::zeros(); k * k];
        let mut mass = 0.0;
        let mut vals = vec![Vector3::zeros(); k];
        for (x, w) in quad.nodes.iter().zip(&quad.weights) {
            let wr = w * config.density.evaluate(x);
            mass += wr;
            vals[0] = x + config.base.value(x);
            for (i, v) in config.movements.iter().enumerate() {
                vals[i + 1] = v.value(x);
            }
            for a in 0..k {
                first[a] += wr * vals[a];
                for b in 0..k {
                    outer[a * k + b] += wr * vals[a] * vals[b].transpose();
                }
            }
        }
        Self { mass, first, outer, k }
    }

    pub fn n(&self) -> usize {
        self.k - 1
    }

    /// `∫ϱF_a`.
    pub fn first(&self, a: usize) -> Vector3<f64> {
        self.first[a]
    }

    /// `∫ϱ F_a ⊗ F_b`.
    pub fn outer(&self, a: usize, b: usize) -> Matrix3<f64> {
        self.outer[a * self.k + b]
    }

    /// `∫ϱ F_a × F_b`.
    pub fn cross(&self, a: usize, b: usize) -> Vector3<f64> {
        let o = self.outer(a, b);
        Vector3::new(o[(1, 2)] - o[(2, 1)], o[(2, 0)] - o[(0, 2)], o[(0, 1)] - o[(1, 0)])
    }

    fn coeffs(&self, s: &ShapeCoords) -> Vec<f64> {
        assert_eq!(s.len(), self.n(), "shape vector length");
        std::iter::once(1.0).chain(s.iter().copied()).collect()
    }

    /// `∫ϱΘ_s`.
    pub fn first_moment(&self, s: &ShapeCoords) -> Vector3<f64> {
        self.coeffs(s).iter().zip(&self.first).fold(Vector3::zeros(), |acc, (c, f)| acc + *c * f)
    }

    /// `∫ϱ Θ_s⊗Θ_s`.
    pub fn second_moment(&self, s: &ShapeCoords) -> Matrix3<f64> {
        let c = self.coeffs(s);
        let mut p = Matrix3::zeros();
        for a in 0..self.k {
            if c[a] == 0.0 {
                continue;
            }
            for b in 0..self.k {
                if c[b] != 0.0 {
                    p += c[a] * c[b] * self.outer(a, b);
                }
            }
        }
        p
    }

    /// Inertia tensor `∫ϱ(|Θ_s|²Id − Θ_s⊗Θ_s)`.
    pub fn inertia(&self, s: &ShapeCoords) -> Matrix3<f64> {
        let p = self.second_moment(s);
        Matrix3::identity() * p.trace() - p
    }

    /// Angular residual `∫ϱ ∂_tΘ × Θ` for `Θ = Θ_s`, `∂_tΘ = Σ ṡᵢVᵢ`.
    pub fn angular_residual(&self, s: &ShapeCoords, sdot: &ShapeCoords) -> Vector3<f64> {
        let c = self.coeffs(s);
        let mut out = Vector3::zeros();
        for (i, d) in sdot.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            for (b, cb) in c.iter().enumerate() {
                if *cb != 0.0 {
                    out += d * cb * self.cross(i + 1, b);
                }
            }
        }
        out
    }
}
