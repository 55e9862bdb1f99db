//! Control vector fields, Lie brackets, rank certificates and tracking.

mod bracket;
mod planner;

pub use crate::dynamics::smooth_controls;
pub use bracket::{
    bracket_tableau, controllability_condition, lie_bracket, lie_bracket_closed_form, lie_bracket_numeric, lie_rank, vector_field,
    BracketEvaluator, BracketTableau, ControllabilityReport, FieldExpr, RankReport, Tangent, DEFAULT_BRACKET_STEP, DEFAULT_RANK_TOLERANCE,
};
pub use planner::{plan_tracking, plan_tracking_with, tracking_error, PlanOutcome, PlannerOptions, TargetPoint, TrackingProblem};
