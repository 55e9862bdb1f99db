//! Zero-impulse swimming dynamics: mass models, control schedules, the RKMK4
//! integrator on SO(3)×R³×Rⁿ and the self-propelled constraint machinery.

mod constraints;
mod integrate;
mod model;
mod schedule;

pub use constraints::{
    check_constraints, check_path_constraints, project_self_propelled, rectify_fields, rectify_fields_seeded, rigid_shell_config,
    rigid_shell_config_seeded, ConstraintResiduals, SelfPropelledProjection, DEFAULT_SEED, GRAM_THRESHOLD,
};
pub use integrate::{integrate, integrate_with, BodyState, IntegratorOptions, RigidVelocity, Sample, Trajectory};
pub use model::{BoundaryModel, InertiaModel, MassModel, ShellRigidModel, ShellRole};
pub use schedule::{smooth_controls, ControlSchedule, Harmonic, Segment};
