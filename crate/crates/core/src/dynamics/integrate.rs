use super::model::connection_of;
use super::{ControlSchedule, MassModel};
use crate::geometry::{ball_quadrature, icosphere, ShapeCoords};
use crate::so3::{dexp_inv, exp, orthogonality_defect};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use std::io::Write;

/// Pose and shape `(R, r, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyState {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
    pub shape: ShapeCoords,
}

impl BodyState {
    pub fn at_rest(n: usize) -> Self {
        Self { rotation: Matrix3::identity(), position: Vector3::zeros(), shape: DVector::zeros(n) }
    }

    /// `‖R − R'‖_F + ‖r − r'‖ + ‖s − s'‖`.
    pub fn distance(&self, other: &BodyState) -> f64 {
        (self.rotation - other.rotation).norm() + (self.position - other.position).norm() + (&self.shape - &other.shape).norm()
    }
}

/// Angular and linear velocity in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidVelocity {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl RigidVelocity {
    pub fn from_stacked(x: &DVector<f64>) -> Self {
        Self { omega: Vector3::new(x[0], x[1], x[2]), v: Vector3::new(x[3], x[4], x[5]) }
    }

    pub fn stacked(&self) -> Vector6<f64> {
        Vector6::new(self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: BodyState,
    pub velocity: RigidVelocity,
}

/// Integrated trajectory with per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Nominal step requested by the caller.
    pub step: f64,
    pub order: usize,
    /// Largest relative residual of `M_r(Ω; v) + N ṡ` over accepted steps.
    pub impulse_residual: f64,
    /// Largest `‖RᵀR − Id‖` over accepted steps.
    pub so3_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Largest state distance between time-aligned samples.
    pub fn max_distance(&self, other: &Trajectory) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.state.distance(&b.state))
            .fold(0.0, f64::max)
    }

    /// Trajectory CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.samples.first().map(|s| s.state.shape.len()).unwrap_or(0);
        let mut header = String::from("t");
        for i in 1..=3 {
            for j in 1..=3 {
                header.push_str(&format!(",R{i}{j}"));
            }
        }
        header.push_str(",r1,r2,r3");
        for i in 1..=n {
            header.push_str(&format!(",s{i}"));
        }
        header.push_str(",Om1,Om2,Om3,v1,v2,v3");
        writeln!(w, "{header}")?;
        for s in &self.samples {
            let mut row = vec![s.t];
            for i in 0..3 {
                for j in 0..3 {
                    row.push(s.state.rotation[(i, j)]);
                }
            }
            row.extend(s.state.position.iter());
            row.extend(s.state.shape.iter());
            row.extend(s.velocity.omega.iter());
            row.extend(s.velocity.v.iter());
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    /// Nominal step; each interval between control breakpoints is split into
    /// an integer number of equal steps no longer than this.
    pub step: f64,
    /// Check `det ∇Θ_s > 0` on probe points after every step when the model
    /// carries a geometric configuration.
    pub check_shape: bool,
}

impl IntegratorOptions {
    pub fn new(step: f64) -> Self {
        Self { step, check_shape: true }
    }
}

struct Frame {
    x: DMatrix<f64>,
    residual: f64,
}

fn frame(model: &MassModel, s: &ShapeCoords, lam: &DVector<f64>) -> Result<Frame> {
    let mm = model.evaluate(s)?;
    let x = connection_of(&mm)?;
    let xi = Vector6::from_iterator((&x * lam).iter().copied());
    let nl = &mm.coupling * lam;
    let mr = mm.mr();
    let res = (mr * xi + Vector6::from_iterator(nl.iter().copied())).norm();
    let scale = mr.norm() * xi.norm() + mm.coupling.norm() * lam.norm();
    Ok(Frame { x, residual: if scale > 0.0 { res / scale } else { 0.0 } })
}

/// Integrates `ṡ = λ(t)`, `(Ω; v) = X(s)λ`, `Ṙ = RΩ̂`, `ṙ = Rv` on `[0, T]`.
pub fn integrate(model: &MassModel, controls: &ControlSchedule, initial: &BodyState, step: f64) -> Result<Trajectory> {
    integrate_with(model, controls, initial, &IntegratorOptions::new(step))
}

/// [`integrate`] with explicit options.
///
/// One RKMK4 step from `(R₀, r₀, s₀)` uses stages `uₖ ∈ so(3)` with
/// `u₁ = 0, u₂ = h/2·k₁, u₃ = h/2·k₂, u₄ = h·k₃` and
/// `kᵢ = dexp⁻¹(uᵢ)·Ω(sᵢ, tᵢ)`; `r` and `s` take the classical RK4 stages.
pub fn integrate_with(model: &MassModel, controls: &ControlSchedule, initial: &BodyState, opts: &IntegratorOptions) -> Result<Trajectory> {
    let n = model.n();
    if controls.dim() != n || initial.shape.len() != n {
        return Err(Error::InvalidInput(format!(
            "controls drive {} fields and the state has {} shape coordinates, model has {n}",
            controls.dim(),
            initial.shape.len()
        )));
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {}", opts.step)));
    }
    // ∇Θ_s is affine in s: tabulate ∇ϑ and ∇Vᵢ at the probe points once
    let probes: Vec<(Vector3<f64>, Matrix3<f64>, Vec<Matrix3<f64>>)> = match (opts.check_shape, model.config()) {
        (true, Some(cfg)) => ball_quadrature(4)
            .nodes
            .into_iter()
            .chain(icosphere(1).0)
            .map(|p| (p, Matrix3::identity() + cfg.base.gradient(&p), cfg.movements.iter().map(|v| v.gradient(&p)).collect()))
            .collect(),
        _ => vec![],
    };
    let fail = |t: f64, e: Error| Error::IntegrationFailed { time: t, source: Box::new(e) };
    let check_shape = |s: &ShapeCoords| -> Result<()> {
        for (p, g0, gv) in &probes {
            let g = gv.iter().zip(s.iter()).fold(*g0, |acc, (gi, si)| acc + gi * *si);
            let det = g.determinant();
            if det <= 0.0 {
                return Err(Error::NonPositiveJacobian { det, x: p.x, y: p.y, z: p.z });
            }
        }
        Ok(())
    };
    check_shape(&initial.shape).map_err(|e| fail(0.0, e))?;

    let breaks = controls.breakpoints();
    let mut state = initial.clone();
    let lam0 = controls.value_within(0.0, breaks[0], *breaks.get(1).unwrap_or(&0.0));
    let f0 = frame(model, &state.shape, &lam0).map_err(|e| fail(0.0, e))?;
    let mut samples = vec![Sample { t: 0.0, state: state.clone(), velocity: RigidVelocity::from_stacked(&(&f0.x * &lam0)) }];
    let mut impulse = f0.residual;
    let mut drift = orthogonality_defect(&state.rotation);
    let mut cached: Option<(ShapeCoords, DMatrix<f64>)> = Some((state.shape.clone(), f0.x));

    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let m = ((len / opts.step) - 1e-9).ceil().max(1.0) as usize;
        let h = len / m as f64;
        for k in 0..m {
            let t0 = lo + k as f64 * h;
            let conn = |s: &ShapeCoords, cache: &Option<(ShapeCoords, DMatrix<f64>)>| -> Result<DMatrix<f64>> {
                if let Some((cs, cx)) = cache {
                    if cs == s {
                        return Ok(cx.clone());
                    }
                }
                model.connection(s)
            };
            let stage = |u: &Vector3<f64>, r: &Matrix3<f64>, tt: f64, x: DMatrix<f64>| {
                let lam = controls.value_within(tt, lo, hi);
                let xi = &x * &lam;
                let omega = Vector3::new(xi[0], xi[1], xi[2]);
                let v = Vector3::new(xi[3], xi[4], xi[5]);
                let ri = r * exp(u);
                (dexp_inv(u, &omega), ri * v, lam)
            };
            let r0 = state.rotation;
            let s0 = state.shape.clone();
            let x1 = conn(&s0, &cached).map_err(|e| fail(t0, e))?;
            let u1 = Vector3::zeros();
            let (ku1, kr1, ks1) = stage(&u1, &r0, t0, x1);
            let u2 = ku1 * (0.5 * h);
            let s2 = &s0 + &ks1 * (0.5 * h);
            let x2 = model.connection(&s2).map_err(|e| fail(t0, e))?;
            let (ku2, kr2, ks2) = stage(&u2, &r0, t0 + 0.5 * h, x2);
            let u3 = ku2 * (0.5 * h);
            let s3 = &s0 + &ks2 * (0.5 * h);
            let x3 = model.connection(&s3).map_err(|e| fail(t0, e))?;
            let (ku3, kr3, ks3) = stage(&u3, &r0, t0 + 0.5 * h, x3);
            let u4 = ku3 * h;
            let s4 = &s0 + &ks3 * h;
            let x4 = model.connection(&s4).map_err(|e| fail(t0, e))?;
            let (ku4, kr4, ks4) = stage(&u4, &r0, t0 + h, x4);

            let u = (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4) * (h / 6.0);
            state.rotation = r0 * exp(&u);
            state.position += (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4) * (h / 6.0);
            state.shape = &s0 + (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4) * (h / 6.0);
            let t = if k + 1 == m { hi } else { t0 + h };

            check_shape(&state.shape).map_err(|e| fail(t, e))?;
            // sample velocity: right limit, except at the final time
            let lam = if t < controls.duration() {
                let next_hi = breaks.get(breaks.partition_point(|b| *b <= t)).copied().unwrap_or(hi);
                controls.value_within(t, t, next_hi)
            } else {
                controls.value_within(t, lo, hi)
            };
            let f = frame(model, &state.shape, &lam).map_err(|e| fail(t, e))?;
            impulse = impulse.max(f.residual);
            drift = drift.max(orthogonality_defect(&state.rotation));
            samples.push(Sample { t, state: state.clone(), velocity: RigidVelocity::from_stacked(&(&f.x * &lam)) });
            cached = Some((state.shape.clone(), f.x));
        }
    }
    Ok(Trajectory { samples, step: opts.step, order: 4, impulse_residual: impulse, so3_drift: drift })
}
