use crate::so3::hat;
use nalgebra::{Matrix3, Vector3};

/// Radius below which the cutoff is exactly one.
pub const CUTOFF_INNER: f64 = 1.5;
/// Radius beyond which the cutoff is exactly zero.
pub const CUTOFF_OUTER: f64 = 2.5;

/// Radial cutoff `χ(r)` and its derivative `χ'(r)`: quintic smoothstep from
/// 1 at [`CUTOFF_INNER`] to 0 at [`CUTOFF_OUTER`], C² across both radii.
pub fn cutoff(r: f64) -> (f64, f64) {
    if r <= CUTOFF_INNER {
        return (1.0, 0.0);
    }
    if r >= CUTOFF_OUTER {
        return (0.0, 0.0);
    }
    let width = CUTOFF_OUTER - CUTOFF_INNER;
    let u = (r - CUTOFF_INNER) / width;
    let step = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    let dstep = 30.0 * u * u * (1.0 - u) * (1.0 - u) / width;
    (1.0 - step, -dstep)
}

fn cutoff_grad(x: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let r = x.norm();
    let (chi, dchi) = cutoff(r);
    if dchi == 0.0 {
        (chi, Vector3::zeros())
    } else {
        (chi, x * (dchi / r))
    }
}

/// One building block of a [`DeformationField`].
#[derive(Debug, Clone, PartialEq)]
pub enum FieldTerm {
    /// `χ(|x|)(A·x + b)`.
    Affine { matrix: Matrix3<f64>, offset: Vector3<f64> },
    /// `(1 − |x|²)² · x^a y^b z^c · e_k` inside the unit ball, zero outside.
    Bump { exponents: [u8; 3], direction: usize },
    /// `χ(|x|) · ω × (x + base(x))`.
    CrossBase { axis: Vector3<f64>, base: DeformationField },
    /// `χ(|x|) · (Q(x + base(x) − c) − x − base(x))`: the displacement that
    /// re-frames `Id + base` by the rigid motion `y ↦ Q(y − c)`.
    Reframe { rotation: Matrix3<f64>, shift: Vector3<f64>, base: DeformationField },
}

impl FieldTerm {
    fn support_radius(&self) -> f64 {
        match self {
            FieldTerm::Bump { .. } => 1.0,
            _ => CUTOFF_OUTER,
        }
    }

    fn value_and_gradient(&self, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        match self {
            FieldTerm::Affine { matrix, offset } => {
                let (chi, gchi) = cutoff_grad(x);
                if chi == 0.0 {
                    return (Vector3::zeros(), Matrix3::zeros());
                }
                let lin = matrix * x + offset;
                (chi * lin, chi * matrix + lin * gchi.transpose())
            }
            FieldTerm::Bump { exponents, direction } => {
                let r2 = x.norm_squared();
                if r2 >= 1.0 {
                    return (Vector3::zeros(), Matrix3::zeros());
                }
                let (p, gp) = monomial(exponents, x);
                let q = 1.0 - r2;
                let envelope = q * q;
                let genv = x * (-4.0 * q);
                let mut value = Vector3::zeros();
                value[*direction] = envelope * p;
                let grad_scalar = envelope * gp + p * genv;
                let mut grad = Matrix3::zeros();
                grad.set_row(*direction, &grad_scalar.transpose());
                (value, grad)
            }
            FieldTerm::CrossBase { axis, base } => {
                let (chi, gchi) = cutoff_grad(x);
                if chi == 0.0 {
                    return (Vector3::zeros(), Matrix3::zeros());
                }
                let (b, gb) = base.value_and_gradient(x);
                let w = hat(axis);
                let u = x + b;
                let wu = w * u;
                (chi * wu, chi * w * (Matrix3::identity() + gb) + wu * gchi.transpose())
            }
            FieldTerm::Reframe { rotation, shift, base } => {
                let (chi, gchi) = cutoff_grad(x);
                if chi == 0.0 {
                    return (Vector3::zeros(), Matrix3::zeros());
                }
                let (b, gb) = base.value_and_gradient(x);
                let u = x + b;
                let d = rotation * (u - shift) - u;
                let m = rotation - Matrix3::identity();
                (chi * d, chi * m * (Matrix3::identity() + gb) + d * gchi.transpose())
            }
        }
    }
}

fn monomial(e: &[u8; 3], x: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let pw = |v: f64, k: u8| if k == 0 { 1.0 } else { v.powi(k as i32) };
    let dpw = |v: f64, k: u8| if k == 0 { 0.0 } else { k as f64 * pw(v, k - 1) };
    let (a, b, c) = (pw(x.x, e[0]), pw(x.y, e[1]), pw(x.z, e[2]));
    let g = Vector3::new(dpw(x.x, e[0]) * b * c, a * dpw(x.y, e[1]) * c, a * b * dpw(x.z, e[2]));
    (a * b * c, g)
}

/// A compactly supported vector field on R³, stored as a linear combination
/// of [`FieldTerm`]s so that values and gradients are exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeformationField {
    terms: Vec<(f64, FieldTerm)>,
}

impl DeformationField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_term(term: FieldTerm) -> Self {
        Self { terms: vec![(1.0, term)] }
    }

    /// `χ(|x|)(A·x + b)`.
    pub fn affine(matrix: Matrix3<f64>, offset: Vector3<f64>) -> Self {
        Self::from_term(FieldTerm::Affine { matrix, offset })
    }

    /// `ε·χ(|x|)·x`.
    pub fn dilation(eps: f64) -> Self {
        Self::affine(Matrix3::identity() * eps, Vector3::zeros())
    }

    /// `χ(|x|)·v`.
    pub fn translation(v: Vector3<f64>) -> Self {
        Self::affine(Matrix3::zeros(), v)
    }

    /// Base deformation mapping the unit ball onto the ellipsoid with semi-axes `(a, b, c)`.
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        Self::affine(Matrix3::from_diagonal(&Vector3::new(a - 1.0, b - 1.0, c - 1.0)), Vector3::zeros())
    }

    pub fn bump(exponents: [u8; 3], direction: usize) -> Self {
        assert!(direction < 3);
        Self::from_term(FieldTerm::Bump { exponents, direction })
    }

    /// `χ(|x|)·ω × (x + base(x))`.
    pub fn cross_base(axis: Vector3<f64>, base: &DeformationField) -> Self {
        Self::from_term(FieldTerm::CrossBase { axis, base: base.clone() })
    }

    pub fn terms(&self) -> &[(f64, FieldTerm)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(k, t)| (k * c, t.clone())).collect(),
        }
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &DeformationField) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().filter(|(k, _)| *k * c != 0.0).map(|(k, t)| (k * c, t.clone())));
        Self { terms }
    }

    pub fn plus(&self, other: &DeformationField) -> Self {
        self.add_scaled(1.0, other)
    }

    /// `Σ cᵢ·fieldsᵢ`, skipping zero coefficients.
    pub fn linear_combination(coeffs: &[f64], fields: &[DeformationField]) -> Self {
        let mut out = Self::zero();
        for (c, f) in coeffs.iter().zip(fields) {
            if *c != 0.0 {
                out = out.add_scaled(*c, f);
            }
        }
        out
    }

    /// Radius beyond which the field vanishes identically.
    pub fn support_radius(&self) -> f64 {
        self.terms.iter().map(|(_, t)| t.support_radius()).fold(0.0, f64::max)
    }

    pub fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.value_and_gradient(x).0
    }

    /// Jacobian `∂Vᵢ/∂xⱼ`.
    pub fn gradient(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        self.value_and_gradient(x).1
    }

    pub fn value_and_gradient(&self, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let mut v = Vector3::zeros();
        let mut g = Matrix3::zeros();
        for (c, t) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            let (tv, tg) = t.value_and_gradient(x);
            v += *c * tv;
            g += *c * tg;
        }
        (v, g)
    }
}
