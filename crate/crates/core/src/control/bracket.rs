use crate::dynamics::{BodyState, MassModel};
use crate::geometry::ShapeCoords;
use crate::so3::hat;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::cell::RefCell;
use std::collections::HashMap;

/// Default finite-difference step for shape derivatives.
pub const DEFAULT_BRACKET_STEP: f64 = 1e-4;
/// Default relative singular-value threshold for numerical rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// Tangent vector at `(R, r, s)`: the rotation block is `R·Ω̂`, the translation
/// block `R·v`, both stored through their body-frame generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Matrix3<f64>,
    pub omega: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub shape: DVector<f64>,
}

impl Tangent {
    fn from_body(base: Matrix3<f64>, body: &DVector<f64>) -> Self {
        Self {
            base,
            omega: Vector3::new(body[0], body[1], body[2]),
            velocity: Vector3::new(body[3], body[4], body[5]),
            shape: body.rows(6, body.len() - 6).into_owned(),
        }
    }

    /// `R·Ω̂ ∈ T_R SO(3)`.
    pub fn rotation_block(&self) -> Matrix3<f64> {
        self.base * hat(&self.omega)
    }

    /// `R·v`.
    pub fn translation(&self) -> Vector3<f64> {
        self.base * self.velocity
    }

    /// `(Ω; v; ṡ)` in the body frame.
    pub fn body(&self) -> DVector<f64> {
        let mut out = DVector::zeros(6 + self.shape.len());
        out.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        out.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        out.rows_mut(6, self.shape.len()).copy_from(&self.shape);
        out
    }

    /// `(RΩ; Rv; ṡ)`: the skew block flattened by the hat-inverse of `R Ω̂ Rᵀ`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut out = self.body();
        out.fixed_rows_mut::<3>(0).copy_from(&(self.base * self.omega));
        out.fixed_rows_mut::<3>(3).copy_from(&(self.base * self.velocity));
        out
    }

    pub fn norm(&self) -> f64 {
        self.body().norm()
    }
}

/// Iterated brackets of the control fields.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Field(usize),
    Scaled(f64, Box<FieldExpr>),
    Bracket(Box<FieldExpr>, Box<FieldExpr>),
}

impl FieldExpr {
    pub fn bracket(a: FieldExpr, b: FieldExpr) -> Self {
        FieldExpr::Bracket(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            FieldExpr::Field(_) => 1,
            FieldExpr::Scaled(_, e) => e.depth(),
            FieldExpr::Bracket(a, b) => a.depth() + b.depth(),
        }
    }

    /// `Z3`, `[Z1,Z2]`, … with one-based field labels.
    pub fn label(&self) -> String {
        match self {
            FieldExpr::Field(i) => format!("Z{}", i + 1),
            FieldExpr::Scaled(c, e) => format!("{c}*{}", e.label()),
            FieldExpr::Bracket(a, b) => format!("[{},{}]", a.label(), b.label()),
        }
    }
}

/// Evaluates control fields and their brackets in body coordinates at
/// `(Id, 0, s)`; the fields are left-invariant, so values at `(R, r, s)` follow
/// by the block rotation `diag(R, R, Id)`. Connection evaluations are memoised.
pub struct BracketEvaluator<'a> {
    model: &'a MassModel,
    step: f64,
    cache: RefCell<HashMap<Vec<u64>, DMatrix<f64>>>,
}

impl<'a> BracketEvaluator<'a> {
    pub fn new(model: &'a MassModel, step: f64) -> Self {
        Self { model, step, cache: RefCell::new(HashMap::new()) }
    }

    fn connection(&self, s: &ShapeCoords) -> Result<DMatrix<f64>> {
        let key: Vec<u64> = s.iter().map(|v| v.to_bits()).collect();
        if let Some(x) = self.cache.borrow().get(&key) {
            return Ok(x.clone());
        }
        let x = self.model.connection(s)?;
        self.cache.borrow_mut().insert(key, x.clone());
        Ok(x)
    }

    /// Body coordinates `(Ω; v; ṡ)` of `expr` at shape `s`.
    pub fn eval(&self, expr: &FieldExpr, s: &ShapeCoords) -> Result<DVector<f64>> {
        let n = self.model.n();
        match expr {
            FieldExpr::Field(i) => {
                if *i >= n {
                    return Err(Error::InvalidInput(format!("field index {i} out of range for {n} fields")));
                }
                let x = self.connection(s)?;
                let mut out = DVector::zeros(6 + n);
                out.rows_mut(0, 6).copy_from(&x.column(*i));
                out[6 + i] = 1.0;
                Ok(out)
            }
            FieldExpr::Scaled(c, e) => Ok(self.eval(e, s)? * *c),
            FieldExpr::Bracket(f, h) => {
                let vf = self.eval(f, s)?;
                let vh = self.eval(h, s)?;
                let cf = vf.rows(6, n).into_owned();
                let ch = vh.rows(6, n).into_owned();
                let dh = self.derivative(h, s, &cf)?;
                let df = self.derivative(f, s, &ch)?;
                let af = Vector3::new(vf[0], vf[1], vf[2]);
                let ah = Vector3::new(vh[0], vh[1], vh[2]);
                let tf = Vector3::new(vf[3], vf[4], vf[5]);
                let th = Vector3::new(vh[3], vh[4], vh[5]);
                let mut out = dh - df;
                let rot = af.cross(&ah);
                let tr = af.cross(&th) - ah.cross(&tf);
                for k in 0..3 {
                    out[k] += rot[k];
                    out[3 + k] += tr[k];
                }
                Ok(out)
            }
        }
    }

    /// Directional derivative of `expr` along `dir`, central differences with
    /// one Richardson level.
    fn derivative(&self, expr: &FieldExpr, s: &ShapeCoords, dir: &DVector<f64>) -> Result<DVector<f64>> {
        if dir.iter().all(|v| *v == 0.0) {
            return Ok(DVector::zeros(6 + self.model.n()));
        }
        let central = |h: f64| -> Result<DVector<f64>> {
            let plus = self.eval(expr, &(s + dir * h))?;
            let minus = self.eval(expr, &(s - dir * h))?;
            Ok((plus - minus) / (2.0 * h))
        };
        let coarse = central(self.step)?;
        let fine = central(0.5 * self.step)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    }
}

/// `Zᵢ(R, s) = (R·X̂¹ᵢ, R·X²ᵢ, fᵢ)` with `Xᵢ = −M_r⁻¹N fᵢ`; zero-based `i`.
pub fn vector_field(model: &MassModel, i: usize, rotation: &Matrix3<f64>, s: &ShapeCoords) -> Result<Tangent> {
    let ev = BracketEvaluator::new(model, DEFAULT_BRACKET_STEP);
    Ok(Tangent::from_body(*rotation, &ev.eval(&FieldExpr::Field(i), s)?))
}

/// `[Zᵢ, Zⱼ](R, s)` with shape derivatives by central differences of step `h`.
pub fn lie_bracket_numeric(model: &MassModel, i: usize, j: usize, rotation: &Matrix3<f64>, s: &ShapeCoords, h: f64) -> Result<Tangent> {
    if i == j {
        return Ok(Tangent::from_body(*rotation, &DVector::zeros(6 + model.n())));
    }
    lie_bracket(model, &FieldExpr::bracket(FieldExpr::Field(i), FieldExpr::Field(j)), rotation, s, h)
}

/// Any iterated bracket at `(R, s)`.
pub fn lie_bracket(model: &MassModel, expr: &FieldExpr, rotation: &Matrix3<f64>, s: &ShapeCoords, h: f64) -> Result<Tangent> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    let ev = BracketEvaluator::new(model, h);
    Ok(Tangent::from_body(*rotation, &ev.eval(expr, s)?))
}

fn cond_factors(inertia: [f64; 3], mu: [f64; 6]) -> [(f64, f64); 3] {
    let [i1, i2, i3] = inertia;
    let [m1, m2, m3, ..] = mu;
    let f12 = i1 * i2 * (-m1 - m2 + m3) + m1 * m2 * (-i1 - i2 + i3);
    let f13 = i1 * i3 * (m1 - m2 + m3) + m1 * m3 * (i1 - i2 + i3);
    let f23 = i2 * i3 * (m1 - m2 - m3) + m2 * m3 * (i1 - i2 - i3);
    let sum_m = m1.abs() + m2.abs() + m3.abs();
    let sum_i = i1.abs() + i2.abs() + i3.abs();
    [
        (f12, (i1 * i2).abs() * sum_m + (m1 * m2).abs() * sum_i),
        (f13, (i1 * i3).abs() * sum_m + (m1 * m3).abs() * sum_i),
        (f23, (i2 * i3).abs() * sum_m + (m2 * m3).abs() * sum_i),
    ]
}

/// Published brackets at `(Id, 0, 0)` for the rigid-shell family with
/// `M_f⋄ = diag(μ)`, `I = diag(I)`; zero-based indices. Reversed pairs follow
/// by antisymmetry, other pairs are [`Error::Unsupported`].
pub fn lie_bracket_closed_form(inertia: [f64; 3], mass: f64, mu: [f64; 6], i: usize, j: usize) -> Result<Tangent> {
    let zero = Tangent { base: Matrix3::identity(), omega: Vector3::zeros(), velocity: Vector3::zeros(), shape: DVector::zeros(6) };
    if i == j {
        return Ok(zero);
    }
    let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let [i1, i2, i3] = inertia;
    let m = mass;
    let d123 = (mu[0] + i1) * (mu[1] + i2) * (mu[2] + i3);
    let f = cond_factors(inertia, mu);
    let mut out = zero;
    match (a, b) {
        (0, 1) => out.omega = Vector3::z() * (f[0].0 / d123),
        (0, 2) => out.omega = Vector3::y() * (f[1].0 / d123),
        (1, 2) => out.omega = Vector3::x() * (f[2].0 / d123),
        (1, 3) => out.velocity = Vector3::z() * (i2 * m * (mu[3] - mu[5]) / ((mu[1] + i2) * (mu[3] + m) * (mu[5] + m))),
        (2, 3) => out.velocity = Vector3::y() * (i3 * m * (mu[4] - mu[3]) / ((mu[2] + i3) * (mu[3] + m) * (mu[4] + m))),
        (2, 4) => out.velocity = Vector3::x() * (i3 * m * (mu[4] - mu[3]) / ((mu[2] + i3) * (mu[3] + m) * (mu[4] + m))),
        _ => return Err(Error::Unsupported { i, j }),
    }
    out.omega *= sign;
    out.velocity *= sign;
    Ok(out)
}

/// Values of the controllability polynomial's factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllabilityReport {
    pub satisfied: bool,
    /// The three rotational bracket numerators.
    pub factors: [f64; 3],
    /// `(μ₄ − μ₆, μ₅ − μ₄)`.
    pub differences: [f64; 2],
}

/// True iff all three factors and both added-mass differences are nonzero
/// beyond `1e-12` times their natural scale.
pub fn controllability_condition(inertia: [f64; 3], mass: f64, mu: [f64; 6]) -> ControllabilityReport {
    let f = cond_factors(inertia, mu);
    let diffs = [(mu[3] - mu[5], mu[3].abs().max(mu[5].abs())), (mu[4] - mu[3], mu[4].abs().max(mu[3].abs()))];
    let nonzero = |(v, scale): (f64, f64)| v.abs() > 1e-12 * scale && scale > 0.0;
    let satisfied = mass > 0.0 && f.iter().all(|x| nonzero(*x)) && diffs.iter().all(|x| nonzero(*x));
    ControllabilityReport { satisfied, factors: [f[0].0, f[1].0, f[2].0], differences: [diffs[0].0, diffs[1].0] }
}

/// Brackets up to a depth, evaluated at one state.
#[derive(Debug, Clone)]
pub struct BracketTableau {
    pub point: BodyState,
    pub exprs: Vec<FieldExpr>,
    pub values: Vec<Tangent>,
    /// `(6+n)×K` matrix of stacked coordinates.
    pub matrix: DMatrix<f64>,
}

/// All fields, then `[Zᵢ,Zⱼ]` for `i < j`, then brackets of fields with the
/// previous level, up to `depth`.
pub fn bracket_tableau(model: &MassModel, point: &BodyState, depth: usize, h: f64) -> Result<BracketTableau> {
    if depth == 0 {
        return Err(Error::InvalidInput("bracket depth must be at least 1".into()));
    }
    let n = model.n();
    let mut exprs: Vec<FieldExpr> = (0..n).map(FieldExpr::Field).collect();
    let mut previous = exprs.clone();
    for level in 2..=depth {
        let mut next = Vec::new();
        if level == 2 {
            for i in 0..n {
                for j in i + 1..n {
                    next.push(FieldExpr::bracket(FieldExpr::Field(i), FieldExpr::Field(j)));
                }
            }
        } else {
            for k in 0..n {
                for e in &previous {
                    next.push(FieldExpr::bracket(FieldExpr::Field(k), e.clone()));
                }
            }
        }
        exprs.extend(next.iter().cloned());
        previous = next;
    }
    let ev = BracketEvaluator::new(model, h);
    let mut values = Vec::with_capacity(exprs.len());
    for e in &exprs {
        values.push(Tangent::from_body(point.rotation, &ev.eval(e, &point.shape)?));
    }
    let matrix = DMatrix::from_fn(6 + n, values.len(), |r, c| values[c].stacked()[r]);
    Ok(BracketTableau { point: point.clone(), exprs, values, matrix })
}

/// Numerical rank of a bracket tableau.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub rank: usize,
    pub required: usize,
    pub depth: usize,
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
    pub labels: Vec<String>,
}

/// `dim Lie_ζ` truncated at `depth`: singular values above `tol·σ_max` of the tableau.
pub fn lie_rank(model: &MassModel, point: &BodyState, depth: usize, tol: f64) -> Result<RankReport> {
    let tab = bracket_tableau(model, point, depth, DEFAULT_BRACKET_STEP)?;
    let mut sv: Vec<f64> = tab.matrix.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|v| **v > tol * smax && smax > 0.0).count();
    Ok(RankReport {
        rank,
        required: 6 + model.n(),
        depth,
        tolerance: tol,
        singular_values: sv,
        labels: tab.exprs.iter().map(|e| e.label()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ShellRigidModel;
    use crate::so3::exp;

    const I: [f64; 3] = [1.0, 2.0, 4.0];
    const MU: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

    fn model(n: usize) -> MassModel {
        MassModel::ShellRigid(ShellRigidModel::parametric(I, 1.0, MU, n))
    }

    #[test]
    fn field_at_rest() {
        let m = model(6);
        let s = DVector::zeros(6);
        let z1 = vector_field(&m, 0, &Matrix3::identity(), &s).unwrap();
        assert!((z1.omega - Vector3::new(-0.1 / 1.1, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(z1.shape[0], 1.0);
        let z4 = vector_field(&m, 3, &Matrix3::identity(), &s).unwrap();
        assert!((z4.velocity[0] + 0.4 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn field_is_equivariant() {
        let m = model(6);
        let s = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3, 0.0, -0.1]);
        let q = exp(&Vector3::new(0.3, -0.5, 0.9));
        let a = vector_field(&m, 1, &Matrix3::identity(), &s).unwrap();
        let b = vector_field(&m, 1, &q, &s).unwrap();
        assert!((b.rotation_block() - q * a.rotation_block()).norm() < 1e-14);
        assert!((b.translation() - q * a.translation()).norm() < 1e-14);
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let m = model(6);
        let s = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3, 0.0, -0.1]);
        let r = exp(&Vector3::new(0.2, 0.1, -0.3));
        for i in 0..6 {
            assert_eq!(lie_bracket_numeric(&m, i, i, &r, &s, 1e-4).unwrap().norm(), 0.0);
            for j in 0..6 {
                let a = lie_bracket_numeric(&m, i, j, &r, &s, 1e-4).unwrap();
                let b = lie_bracket_numeric(&m, j, i, &r, &s, 1e-4).unwrap();
                assert!((a.body() + b.body()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn bracket_is_bilinear() {
        let m = model(5);
        let s = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3, 0.0]);
        let base = lie_bracket(&m, &FieldExpr::bracket(FieldExpr::Field(1), FieldExpr::Field(3)), &Matrix3::identity(), &s, 1e-4).unwrap();
        let scaled = FieldExpr::bracket(FieldExpr::Scaled(2.5, Box::new(FieldExpr::Field(1))), FieldExpr::Scaled(-0.4, Box::new(FieldExpr::Field(3))));
        let v = lie_bracket(&m, &scaled, &Matrix3::identity(), &s, 1e-4).unwrap();
        let d = (v.body() - base.body() * -1.0).norm();
        assert!(d < 1e-10 * base.norm(), "{d}");
    }

    #[test]
    fn first_closed_form_coefficient() {
        let z = lie_bracket_closed_form(I, 1.0, MU, 0, 1).unwrap();
        assert!((z.omega[2] - 0.02 / 10.406).abs() < 1e-15);
        let z = lie_bracket_closed_form(I, 1.0, MU, 1, 3).unwrap();
        assert!((z.velocity[2] - 2.0 * (0.4 - 0.6) / (2.2 * 1.4 * 1.6)).abs() < 1e-15);
        let r = lie_bracket_closed_form(I, 1.0, MU, 3, 1).unwrap();
        assert_eq!(r.velocity, -z.velocity);
        assert!(matches!(lie_bracket_closed_form(I, 1.0, MU, 0, 4), Err(Error::Unsupported { i: 0, j: 4 })));
    }

    #[test]
    fn closed_form_degeneracies() {
        let z = lie_bracket_closed_form(I, 1.0, [0.0, 0.0, 0.0, 0.4, 0.5, 0.6], 0, 1).unwrap();
        assert_eq!(z.omega.norm(), 0.0);
        let z = lie_bracket_closed_form(I, 1.0, [0.1, 0.2, 0.3, 0.5, 0.5, 0.5], 1, 3).unwrap();
        assert_eq!(z.velocity.norm(), 0.0);
    }

    #[test]
    fn condition_factors() {
        let r = controllability_condition(I, 1.0, MU);
        assert!(r.satisfied);
        for (a, b) in r.factors.iter().zip([0.02, 0.89, -3.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((r.differences[0] + 0.2).abs() < 1e-15 && (r.differences[1] - 0.1).abs() < 1e-15);
        let sphere = controllability_condition([1.0, 1.0, 1.0], 1.0, [0.0, 0.0, 0.0, 0.5, 0.5, 0.5]);
        assert!(!sphere.satisfied && sphere.factors.iter().all(|f| *f == 0.0));
        let cancel = controllability_condition([1.0, 2.0, 3.0], 1.0, MU);
        assert!(!cancel.satisfied && cancel.factors[0].abs() < 1e-15);
    }

    #[test]
    fn single_field_rank() {
        let m = model(1);
        let p = BodyState::at_rest(1);
        assert_eq!(lie_rank(&m, &p, 1, DEFAULT_RANK_TOLERANCE).unwrap().rank, 1);
        assert!(lie_rank(&m, &p, 3, DEFAULT_RANK_TOLERANCE).unwrap().rank <= 2);
    }

    #[test]
    fn rank_ignores_orientation() {
        let m = model(5);
        let mut p = BodyState::at_rest(5);
        p.shape = DVector::from_vec(vec![0.05, -0.02, 0.03, 0.01, 0.02]);
        let r0 = lie_rank(&m, &p, 2, DEFAULT_RANK_TOLERANCE).unwrap();
        p.rotation = exp(&Vector3::new(1.0, -0.4, 2.0));
        p.position = Vector3::new(3.0, 1.0, -2.0);
        let r1 = lie_rank(&m, &p, 2, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(r0.rank, r1.rank);
        for (a, b) in r0.singular_values.iter().zip(&r1.singular_values) {
            assert!((a - b).abs() < 1e-12 * r0.singular_values[0]);
        }
    }
}
