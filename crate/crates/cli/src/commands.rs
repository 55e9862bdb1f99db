use crate::output::{write_json, write_with};
use crate::scenario::{Scenario, ScenarioError};
use nalgebra::{DVector, Matrix3, Matrix6};
use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use swimmer_core::control::{controllability_condition, lie_rank, plan_tracking_with, tracking_error, PlannerOptions, TrackingProblem};
use swimmer_core::dynamics::{integrate, BodyState, ControlSchedule, MassModel};
use swimmer_core::geometry::{surface_mesh, DensityField, SwimmerConfig};
use swimmer_core::potential::{added_mass_matrix, ellipsoid_added_mass};
use swimmer_core::so3::log;
use swimmer_core::Error;

pub struct Context {
    pub scenario: Scenario,
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context {
    fn log(&self, msg: impl fmt::Display) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Scenario(ScenarioError),
    Core(Error),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Scenario(_) => 2,
            Failure::Core(e) => match e {
                Error::InvalidInput(_) | Error::InertiaTargetInfeasible { .. } | Error::BaseNotCentered { .. } => 2,
                Error::NotControllable { .. } => 4,
                Error::ToleranceNotMet { .. } => 5,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Scenario(e) => write!(f, "invalid scenario: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Scenario(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn rows6(m: &Matrix6<f64>) -> Vec<[f64; 6]> {
    (0..6).map(|i| std::array::from_fn(|j| m[(i, j)])).collect()
}

fn rows3(m: &Matrix3<f64>) -> Vec<[f64; 3]> {
    (0..3).map(|i| std::array::from_fn(|j| m[(i, j)])).collect()
}

#[derive(Serialize)]
struct AddedMassReport {
    refinement: usize,
    panels: usize,
    bem: Vec<[f64; 6]>,
    oracle: Option<Vec<[f64; 6]>>,
    /// `|bem − oracle| / oracle` on the translational diagonal.
    translational_relative_error: Option<[f64; 3]>,
    max_translational_relative_error: Option<f64>,
    /// `|bem − oracle|` on the rotational diagonal.
    rotational_abs_error: Option<[f64; 3]>,
    eigenvalues: Vec<f64>,
    min_eigenvalue: f64,
    near_zero_eigenvalues: usize,
}

pub fn addedmass(ctx: &Context) -> Result<(), Failure> {
    let sc = &ctx.scenario;
    let base = sc.base().ok_or_else(|| ScenarioError { field: "shape".into(), message: "addedmass needs a shape".into() })?;
    let k = sc.numerics.refinement;
    let cfg = SwimmerConfig::new(DensityField::Constant(1.0), base, vec![]);
    let mesh = surface_mesh(&cfg, &DVector::zeros(0), k)?;
    ctx.log(format_args!("solving on {} panels", mesh.panels.len()));
    let mf = added_mass_matrix(&mesh)?;
    let oracle = sc.axes().map(|[a, b, c]| ellipsoid_added_mass(a, b, c));
    let mut eig: Vec<f64> = mf.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let report = AddedMassReport {
        refinement: k,
        panels: mesh.panels.len(),
        bem: rows6(&mf),
        oracle: oracle.as_ref().map(rows6),
        translational_relative_error: oracle.map(|o| std::array::from_fn(|i| (mf[(3 + i, 3 + i)] - o[(3 + i, 3 + i)]).abs() / o[(3 + i, 3 + i)])),
        max_translational_relative_error: oracle.map(|o| (3..6).map(|i| (mf[(i, i)] - o[(i, i)]).abs() / o[(i, i)]).fold(0.0, f64::max)),
        rotational_abs_error: oracle.map(|o| std::array::from_fn(|i| (mf[(i, i)] - o[(i, i)]).abs())),
        min_eigenvalue: eig[0],
        near_zero_eigenvalues: eig.iter().filter(|v| **v < 1e-3).count(),
        eigenvalues: eig,
    };
    write_json(&ctx.out.join("addedmass.json"), &report)?;
    Ok(())
}

#[derive(Serialize)]
struct StateReport {
    rotation: Vec<[f64; 3]>,
    position: [f64; 3],
    shape: Vec<f64>,
}

impl StateReport {
    fn new(s: &BodyState) -> Self {
        Self { rotation: rows3(&s.rotation), position: s.position.into(), shape: s.shape.iter().copied().collect() }
    }
}

#[derive(Serialize)]
struct TrackingReport {
    sup_error: f64,
    endpoint_error: f64,
}

#[derive(Serialize)]
struct SimulationSummary {
    duration: f64,
    step: f64,
    samples: usize,
    initial: StateReport,
    final_state: StateReport,
    net_rotation_angle: f64,
    net_translation: f64,
    /// `‖R_T − R_0‖_F + ‖r_T − r_0‖ + ‖s_T − s_0‖`.
    return_distance: f64,
    returns_to_start: bool,
    impulse_residual_max: f64,
    so3_drift_max: f64,
    tracking: Option<TrackingReport>,
}

/// Initial state: the first waypoint when a target is given, rest otherwise.
fn initial_state(sc: &Scenario) -> BodyState {
    let mut st = BodyState::at_rest(sc.n());
    if let Some((_, rots, pos)) = sc.waypoints() {
        st.rotation = rots[0];
        st.position = pos[0];
    }
    st
}

fn problem(sc: &Scenario) -> Result<Option<TrackingProblem>, Failure> {
    match (sc.waypoints(), &sc.target) {
        (Some((t, r, p)), Some(spec)) => Ok(Some(TrackingProblem::waypoints(&t, &r, &p, spec.tolerance)?)),
        _ => Ok(None),
    }
}

fn model(ctx: &Context) -> Result<MassModel, Failure> {
    ctx.log("building configuration and mass model");
    Ok(ctx.scenario.model()?)
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let sc = &ctx.scenario;
    let sched = sc.schedule()?.ok_or_else(|| ScenarioError { field: "controls".into(), message: "simulate needs controls".into() })?;
    let model = model(ctx)?;
    let initial = initial_state(sc);
    ctx.log(format_args!("integrating over [0, {}] with step {}", sched.duration(), sc.numerics.step));
    let traj = integrate(&model, &sched, &initial, sc.numerics.step)?;
    let last = &traj.last().state;
    let tracking = problem(sc)?.map(|p| TrackingReport {
        sup_error: traj.samples.iter().map(|s| tracking_error(&p, s)).fold(0.0, f64::max),
        endpoint_error: tracking_error(&p, traj.last()),
    });
    let distance = last.distance(&initial);
    let summary = SimulationSummary {
        duration: sched.duration(),
        step: sc.numerics.step,
        samples: traj.samples.len(),
        initial: StateReport::new(&initial),
        final_state: StateReport::new(last),
        net_rotation_angle: log(&(initial.rotation.transpose() * last.rotation)).norm(),
        net_translation: (last.position - initial.position).norm(),
        return_distance: distance,
        returns_to_start: distance < 1e-8,
        impulse_residual_max: traj.impulse_residual,
        so3_drift_max: traj.so3_drift,
        tracking,
    };
    write_with(&ctx.out.join("trajectory.csv"), |w| traj.write_csv(w))?;
    write_json(&ctx.out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct ConditionReport {
    inertia: [f64; 3],
    mass: f64,
    mu: [f64; 6],
    factors: [f64; 3],
    differences: [f64; 2],
    satisfied: bool,
}

#[derive(Serialize)]
struct RankCertificate {
    fields: usize,
    depth: usize,
    tolerance: f64,
    rank: usize,
    required: usize,
    controllable: bool,
    singular_values: Vec<f64>,
    labels: Vec<String>,
    /// Closed-form condition evaluated on the principal inertia and the
    /// diagonal of the added mass at the rest shape.
    condition: ConditionReport,
}

pub fn rank(ctx: &Context) -> Result<(), Failure> {
    let sc = &ctx.scenario;
    if sc.n() == 0 {
        return Err(ScenarioError { field: "movements".into(), message: "rank needs movements".into() }.into());
    }
    let model = model(ctx)?;
    let point = BodyState::at_rest(sc.n());
    let r = lie_rank(&model, &point, sc.numerics.depth, sc.numerics.rank_tolerance)?;
    let mm = model.evaluate(&point.shape)?;
    let inertia: [f64; 3] = std::array::from_fn(|i| mm.inertia[(i, i)]);
    let mu: [f64; 6] = std::array::from_fn(|i| mm.mf[(i, i)]);
    let cond = controllability_condition(inertia, mm.mass, mu);
    let cert = RankCertificate {
        fields: sc.n(),
        depth: r.depth,
        tolerance: r.tolerance,
        rank: r.rank,
        required: r.required,
        controllable: r.rank == r.required,
        singular_values: r.singular_values,
        labels: r.labels,
        condition: ConditionReport { inertia, mass: mm.mass, mu, factors: cond.factors, differences: cond.differences, satisfied: cond.satisfied },
    };
    ctx.log(format_args!("rank {} of {}", cert.rank, cert.required));
    write_json(&ctx.out.join("rank.json"), &cert)?;
    Ok(())
}

#[derive(Serialize)]
struct PlanReport {
    met: bool,
    tolerance: f64,
    horizon: f64,
    sup_error: f64,
    endpoint_error: f64,
    legs: Option<usize>,
    brackets: Vec<String>,
    step: f64,
}

fn write_schedule(ctx: &Context, sched: &ControlSchedule) -> Result<(), Failure> {
    write_with(&ctx.out.join("schedule.csv"), |w| sched.write_csv(w))?;
    Ok(())
}

pub fn plan(ctx: &Context) -> Result<(), Failure> {
    let sc = &ctx.scenario;
    let problem = problem(sc)?.ok_or_else(|| ScenarioError { field: "target".into(), message: "plan needs target waypoints".into() })?;
    if sc.n() == 0 {
        return Err(ScenarioError { field: "movements".into(), message: "plan needs movements".into() }.into());
    }
    let model = model(ctx)?;
    let opts = PlannerOptions {
        step: sc.numerics.step,
        initial_legs: sc.numerics.initial_legs,
        max_legs: sc.numerics.max_legs,
        bracket_step: sc.numerics.bracket_step,
        ..PlannerOptions::default()
    };
    ctx.log(format_args!("planning over [0, {}] with tolerance {}", problem.horizon, problem.tolerance));
    match plan_tracking_with(&model, &problem, &opts) {
        Ok(out) => {
            write_schedule(ctx, &out.schedule)?;
            let report = PlanReport {
                met: true,
                tolerance: problem.tolerance,
                horizon: problem.horizon,
                sup_error: out.sup_error,
                endpoint_error: out.endpoint_error,
                legs: Some(out.legs),
                brackets: out.brackets.iter().map(|(i, j)| format!("[Z{},Z{}]", i + 1, j + 1)).collect(),
                step: opts.step,
            };
            ctx.log(format_args!("{} legs, sup error {:.3e}", out.legs, out.sup_error));
            write_json(&ctx.out.join("plan.json"), &report)?;
            Ok(())
        }
        Err(Error::ToleranceNotMet { sup_error, endpoint_error, schedule }) => {
            write_schedule(ctx, &schedule)?;
            let report = PlanReport {
                met: false,
                tolerance: problem.tolerance,
                horizon: problem.horizon,
                sup_error,
                endpoint_error,
                legs: None,
                brackets: vec![],
                step: opts.step,
            };
            write_json(&ctx.out.join("plan.json"), &report)?;
            Err(Error::ToleranceNotMet { sup_error, endpoint_error, schedule }.into())
        }
        Err(e) => Err(e.into()),
    }
}
