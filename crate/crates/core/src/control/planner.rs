use super::bracket::{BracketEvaluator, FieldExpr};
use crate::dynamics::{integrate, BodyState, ControlSchedule, MassModel, Sample, Segment, Trajectory};
use crate::so3::{exp, log};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::fmt;
use std::sync::Arc;

/// Desired pose (and optionally shape) at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPoint {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
    pub shape: Option<DVector<f64>>,
}

impl TargetPoint {
    pub fn pose(rotation: Matrix3<f64>, position: Vector3<f64>) -> Self {
        Self { rotation, position, shape: None }
    }
}

/// Target trajectory on `[0, T]` with tolerance `ε`.
#[derive(Clone)]
pub struct TrackingProblem {
    pub horizon: f64,
    pub tolerance: f64,
    target: Arc<dyn Fn(f64) -> TargetPoint + Send + Sync>,
}

impl fmt::Debug for TrackingProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrackingProblem").field("horizon", &self.horizon).field("tolerance", &self.tolerance).finish_non_exhaustive()
    }
}

impl TrackingProblem {
    pub fn new(horizon: f64, tolerance: f64, target: impl Fn(f64) -> TargetPoint + Send + Sync + 'static) -> Result<Self> {
        if !(horizon > 0.0) || !(tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("horizon and tolerance must be positive, got {horizon} and {tolerance}")));
        }
        Ok(Self { horizon, tolerance, target: Arc::new(target) })
    }

    /// Piecewise geodesic interpolation of poses given at increasing times
    /// starting at 0; the last time is the horizon.
    pub fn waypoints(times: &[f64], rotations: &[Matrix3<f64>], positions: &[Vector3<f64>], tolerance: f64) -> Result<Self> {
        if times.len() < 2 || rotations.len() != times.len() || positions.len() != times.len() {
            return Err(Error::InvalidInput("need at least two waypoints with matching rotations and positions".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("waypoint times must start at 0 and increase strictly".into()));
        }
        let times = times.to_vec();
        let rotations = rotations.to_vec();
        let positions = positions.to_vec();
        let horizon = *times.last().unwrap();
        Self::new(horizon, tolerance, move |t| {
            let k = times.partition_point(|s| *s <= t).clamp(1, times.len() - 1) - 1;
            let u = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
            let rel = log(&(rotations[k].transpose() * rotations[k + 1]));
            TargetPoint::pose(rotations[k] * exp(&(rel * u)), positions[k] * (1.0 - u) + positions[k + 1] * u)
        })
    }

    pub fn target(&self, t: f64) -> TargetPoint {
        (self.target)(t)
    }
}

/// `‖R̄ − R‖_F + ‖r̄ − r‖ (+ ‖s̄ − s‖ when a shape target is given)`.
pub fn tracking_error(problem: &TrackingProblem, sample: &Sample) -> f64 {
    let tgt = problem.target(sample.t);
    let st = &sample.state;
    let mut e = (tgt.rotation - st.rotation).norm() + (tgt.position - st.position).norm();
    if let Some(s) = &tgt.shape {
        e += (s - &st.shape).norm();
    }
    e
}

#[derive(Debug, Clone)]
pub struct PlannerOptions {
    /// Integrator step used for planning and verification.
    pub step: f64,
    pub initial_legs: usize,
    pub max_legs: usize,
    /// Lower bound on the fixed amplitude of the second field in a commutator.
    pub kappa_min: f64,
    pub newton_iterations: usize,
    pub bracket_step: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self { step: 1e-2, initial_legs: 8, max_legs: 1 << 15, kappa_min: 1e-4, newton_iterations: 12, bracket_step: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub schedule: ControlSchedule,
    pub trajectory: Trajectory,
    pub sup_error: f64,
    pub endpoint_error: f64,
    pub legs: usize,
    /// Bracket pairs completing the fields to a frame of the tangent space.
    pub brackets: Vec<(usize, usize)>,
}

/// [`plan_tracking_with`] with default options.
pub fn plan_tracking(model: &MassModel, problem: &TrackingProblem) -> Result<PlanOutcome> {
    plan_tracking_with(model, problem, &PlannerOptions::default())
}

/// Piecewise-constant controls tracking `problem` from its initial pose.
///
/// `[0, T]` is cut into legs. On each leg the error to the target at the leg
/// end, in body coordinates `(log(RᵀR̄), Rᵀ(r̄ − r), s̄ − s)`, is expanded on the
/// fields and a set of first brackets; field components become a straight
/// segment, bracket components `b` commutator loops `+pZᵢ, +κZⱼ, −pZᵢ, −κZⱼ`
/// with `κ = max(√|b|, κ_min)`. Newton iterations on the amplitudes then close
/// the leg endpoint on the integrated trajectory. The legs are refined until
/// the re-integrated schedule meets `ε` everywhere and `ε/10` at `T`.
pub fn plan_tracking_with(model: &MassModel, problem: &TrackingProblem, opts: &PlannerOptions) -> Result<PlanOutcome> {
    let n = model.n();
    let start = problem.target(0.0);
    let initial = BodyState {
        rotation: start.rotation,
        position: start.position,
        shape: start.shape.clone().unwrap_or_else(|| DVector::zeros(n)),
    };
    if initial.shape.len() != n {
        return Err(Error::InvalidInput(format!("target shape has length {}, model has {n} fields", initial.shape.len())));
    }
    let ev = BracketEvaluator::new(model, opts.bracket_step);
    let pairs = select_brackets(&ev, n, &initial.shape)?;
    let planner = LegPlanner { model, problem, opts, ev: &ev, pairs: &pairs, rest_shape: initial.shape.clone() };

    let eps = problem.tolerance;
    let mut legs = opts.initial_legs.max(1);
    let mut best: Option<PlanOutcome> = None;
    loop {
        let attempt = planner.plan(&initial, legs).and_then(|schedule| {
            let trajectory = integrate(model, &schedule, &initial, opts.step)?;
            Ok((schedule, trajectory))
        });
        let (schedule, trajectory) = match attempt {
            Ok(v) => v,
            // legs too long: the loops leave the admissible shapes
            Err(Error::IntegrationFailed { .. }) if legs * 16 <= opts.max_legs => {
                legs *= 16;
                continue;
            }
            Err(e) => return Err(best.map_or(e, |b| tolerance_not_met(b))),
        };
        let sup_error = trajectory.samples.iter().map(|s| tracking_error(problem, s)).fold(0.0, f64::max);
        let endpoint_error = tracking_error(problem, trajectory.last());
        let outcome = PlanOutcome { schedule, trajectory, sup_error, endpoint_error, legs, brackets: pairs.clone() };
        if sup_error < eps && endpoint_error < 0.1 * eps {
            return Ok(outcome);
        }
        let factor = if sup_error >= eps { ((sup_error / (0.8 * eps)).powi(2)).ceil().clamp(2.0, 16.0) as usize } else { 2 };
        if best.as_ref().map_or(true, |b| outcome.sup_error + outcome.endpoint_error < b.sup_error + b.endpoint_error) {
            best = Some(outcome);
        }
        if legs * factor > opts.max_legs {
            return Err(tolerance_not_met(best.unwrap()));
        }
        legs *= factor;
    }
}

fn tolerance_not_met(best: PlanOutcome) -> Error {
    Error::ToleranceNotMet { sup_error: best.sup_error, endpoint_error: best.endpoint_error, schedule: Box::new(best.schedule) }
}

/// Greedily adds first brackets to the fields until they frame the tangent space.
fn select_brackets(ev: &BracketEvaluator<'_>, n: usize, s: &DVector<f64>) -> Result<Vec<(usize, usize)>> {
    let dim = 6 + n;
    let unit = |v: DVector<f64>| {
        let nv = v.norm();
        if nv > 0.0 {
            v / nv
        } else {
            v
        }
    };
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for i in 0..n {
        cols.push(unit(ev.eval(&FieldExpr::Field(i), s)?));
    }
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = ev.eval(&FieldExpr::bracket(FieldExpr::Field(i), FieldExpr::Field(j)), s)?;
            candidates.push(((i, j), unit(v)));
        }
    }
    let mut chosen = Vec::new();
    let smallest = |cols: &[DVector<f64>]| {
        let m = DMatrix::from_columns(cols);
        m.svd(false, false).singular_values.min()
    };
    while cols.len() < dim {
        let mut pick: Option<(usize, f64)> = None;
        for (k, (_, v)) in candidates.iter().enumerate() {
            let mut trial = cols.clone();
            trial.push(v.clone());
            let sv = smallest(&trial);
            if pick.map_or(true, |(_, b)| sv > b) {
                pick = Some((k, sv));
            }
        }
        match pick {
            Some((k, sv)) if sv > 1e-8 => {
                let (pair, v) = candidates.remove(k);
                chosen.push(pair);
                cols.push(v);
            }
            _ => return Err(Error::NotControllable { rank: cols.len(), required: dim }),
        }
    }
    Ok(chosen)
}

struct LegPlanner<'a> {
    model: &'a MassModel,
    problem: &'a TrackingProblem,
    opts: &'a PlannerOptions,
    ev: &'a BracketEvaluator<'a>,
    pairs: &'a [(usize, usize)],
    rest_shape: DVector<f64>,
}

/// Amplitudes carried from one leg to the next.
struct Warm {
    kappa: Vec<f64>,
    q: DVector<f64>,
    jacobian: DMatrix<f64>,
}

impl LegPlanner<'_> {
    fn error_coords(&self, state: &BodyState, t: f64) -> DVector<f64> {
        let tgt = self.problem.target(t);
        let shape = tgt.shape.unwrap_or_else(|| self.rest_shape.clone());
        let rt = state.rotation.transpose();
        let rot = log(&(rt * tgt.rotation));
        let tr = rt * (tgt.position - state.position);
        let mut e = DVector::zeros(6 + shape.len());
        e.fixed_rows_mut::<3>(0).copy_from(&rot);
        e.fixed_rows_mut::<3>(3).copy_from(&tr);
        e.rows_mut(6, shape.len()).copy_from(&(shape - &state.shape));
        e
    }

    /// Segments of one leg on `[t0, t0 + tau]`: a direct segment then one
    /// four-part commutator per bracket.
    fn segments(&self, q: &DVector<f64>, kappa: &[f64], t0: f64, tau: f64) -> Vec<Segment> {
        let n = self.model.n();
        let nb = self.pairs.len();
        let direct = if nb == 0 { tau } else { 0.2 * tau };
        let sub = if nb == 0 { 0.0 } else { (tau - direct) / (4 * nb) as f64 };
        let mut out = Vec::with_capacity(1 + 4 * nb);
        out.push(Segment { start: t0, end: t0 + direct, values: (0..n).map(|i| q[i] / direct).collect() });
        let mut t = t0 + direct;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let p = q[n + k];
            for (field, amp) in [(i, p), (j, kappa[k]), (i, -p), (j, -kappa[k])] {
                let mut values = vec![0.0; n];
                values[field] = amp / sub;
                out.push(Segment { start: t, end: t + sub, values });
                t += sub;
            }
        }
        out.last_mut().unwrap().end = t0 + tau;
        out
    }

    fn run_leg(&self, state: &BodyState, q: &DVector<f64>, kappa: &[f64], tau: f64) -> Result<BodyState> {
        let segs = self.segments(q, kappa, 0.0, tau);
        let sched = ControlSchedule::piecewise(self.model.n(), segs)?;
        Ok(integrate(self.model, &sched, state, self.opts.step)?.last().state.clone())
    }

    fn plan(&self, initial: &BodyState, legs: usize) -> Result<ControlSchedule> {
        let n = self.model.n();
        let dim = 6 + n;
        let horizon = self.problem.horizon;
        let tau = horizon / legs as f64;
        let leg_tol = 1e-4 * self.problem.tolerance;
        let mut state = initial.clone();
        let mut segments = Vec::new();
        let mut warm: Option<Warm> = None;
        for leg in 0..legs {
            let t0 = leg as f64 * tau;
            let t1 = if leg + 1 == legs { horizon } else { t0 + tau };
            let e0 = self.error_coords(&state, t1);
            if e0.norm() <= leg_tol {
                segments.push(Segment { start: t0, end: t1, values: vec![0.0; n] });
                continue;
            }
            // linear guess from the local frame
            let mut frame = DMatrix::zeros(dim, dim);
            for i in 0..n {
                frame.set_column(i, &self.ev.eval(&FieldExpr::Field(i), &state.shape)?);
            }
            for (k, &(i, j)) in self.pairs.iter().enumerate() {
                frame.set_column(n + k, &self.ev.eval(&FieldExpr::bracket(FieldExpr::Field(i), FieldExpr::Field(j)), &state.shape)?);
            }
            let b = frame.clone().lu().solve(&e0).ok_or(Error::NotControllable { rank: dim - 1, required: dim })?;
            // one loop size for all brackets keeps the amplitude Jacobian balanced
            let size = (0..self.pairs.len()).map(|k| b[n + k].abs().sqrt()).fold(self.opts.kappa_min, f64::max);
            let fresh_kappa = vec![size; self.pairs.len()];
            let mut q = b.clone();
            let mut kappa = fresh_kappa.clone();
            let mut jac: Option<DMatrix<f64>> = None;
            if let Some(w) = &warm {
                let close = w.kappa.iter().zip(&fresh_kappa).all(|(a, b)| a / b < 2.0 && b / a < 2.0);
                if close {
                    kappa = w.kappa.clone();
                    q = w.q.clone();
                    jac = Some(w.jacobian.clone());
                }
            }
            if jac.is_none() {
                for k in 0..self.pairs.len() {
                    q[n + k] = b[n + k] / kappa[k];
                }
            }
            let residual = |q: &DVector<f64>| -> Result<(DVector<f64>, BodyState)> {
                let end = self.run_leg(&state, q, &kappa, t1 - t0)?;
                Ok((self.error_coords(&end, t1), end))
            };
            let (mut f, mut end) = residual(&q)?;
            let mut fresh_jacobian = false;
            for _ in 0..self.opts.newton_iterations {
                if f.norm() <= leg_tol {
                    break;
                }
                if jac.is_none() {
                    let mut j = DMatrix::zeros(dim, dim);
                    for c in 0..dim {
                        let d = 1e-6 * q[c].abs().max(1.0);
                        let mut qp = q.clone();
                        qp[c] += d;
                        j.set_column(c, &((residual(&qp)?.0 - &f) / d));
                    }
                    jac = Some(j);
                    fresh_jacobian = true;
                }
                let j = jac.as_ref().unwrap();
                let step = match j.clone().lu().solve(&f) {
                    Some(s) => -s,
                    None => -j.clone().pseudo_inverse(1e-12).map_err(|e| Error::InvalidInput(e.to_string()))? * &f,
                };
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..5 {
                    let trial = &q + &step * alpha;
                    let (ft, et) = match residual(&trial) {
                        Ok(v) => v,
                        Err(Error::IntegrationFailed { .. }) => {
                            alpha *= 0.5;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    if ft.norm() < f.norm() {
                        let slow = ft.norm() > 0.25 * f.norm();
                        q = trial;
                        f = ft;
                        end = et;
                        accepted = true;
                        if slow && !fresh_jacobian {
                            jac = None;
                        }
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    if fresh_jacobian {
                        break;
                    }
                    jac = None;
                }
                fresh_jacobian = false;
            }
            segments.extend(self.segments(&q, &kappa, t0, t1 - t0));
            if let Some(j) = jac {
                warm = Some(Warm { kappa, q, jacobian: j });
            }
            state = end;
        }
        ControlSchedule::piecewise(n, segments)
    }
}
