//! Polytopes, safe regions and the tightened planning sets.

mod check;
mod polytope;
mod propagation;

pub use check::{check_propagation_conditions, ConditionReport, PieceReport, PropagationReport, CHECK_TOL};
pub use polytope::{max_norm_over, membership, HPolytope, Region, SafeRegion, MEMBERSHIP_TOL};
pub use propagation::{
    build_planning_sets, input_shrink_norms, plan_inputs, q_vanishes, tighten_state, InputPlanning, tighten_input, tighten_output, xbar_from_output, PlanningOptions,
    PlanningSets, PropagationProblem, INV_SQRT_FLOOR, Q_ZERO_TOL,
};
