use nalgebra::DVector;

use super::MONITOR_TOL;
use crate::scalar::Real;
use crate::systems::RatePair;

/// One low-level sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRecord<T: Real> {
    pub t: T,
    pub xbar: DVector<T>,
    pub ubar: DVector<T>,
    pub x: DVector<T>,
    pub u: DVector<T>,
    pub ybar: DVector<T>,
    pub y: DVector<T>,
    pub v: T,
    pub dist: T,
    pub eps_ok: bool,
    pub y_in_y: bool,
    pub u_in_u: bool,
}

/// One planner call.
#[derive(Debug, Clone, PartialEq)]
pub struct HighRecord<T: Real> {
    pub h: usize,
    pub t: T,
    pub piece: usize,
    pub cursor: usize,
    /// Optimal MPC cost, absent when planning failed.
    pub value: Option<T>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog<T: Real> {
    pub epsilon: T,
    pub rates: RatePair<T>,
    pub strict_lowlevel_output: bool,
    pub low: Vec<LowRecord<T>>,
    /// Whether each low record falls on a planner step.
    pub at_high: Vec<bool>,
    pub high: Vec<HighRecord<T>>,
    pub v0: T,
    /// `max(V₀, γ²ū_max²)`.
    pub v_bound: T,
    pub goal_reached_at: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsVerdict<T: Real> {
    pub passed: bool,
    pub max_dist: T,
    pub argmax: usize,
}

/// Passes iff every `‖ȳ − y‖ ≤ ε` up to the monitor slack.
pub fn monitor_eps<T: Real>(log: &TraceLog<T>, eps: T) -> EpsVerdict<T> {
    let (argmax, max_dist) = log
        .low
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(i, d), (j, r)| if r.dist > d { (j, r.dist) } else { (i, d) });
    EpsVerdict {
        passed: max_dist <= eps + T::lit(MONITOR_TOL),
        max_dist,
        argmax,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSummary<T: Real> {
    pub eps: EpsVerdict<T>,
    /// `y ∉ Y` at planner steps.
    pub output_high_violations: usize,
    /// `y ∉ Y` at any low-level step.
    pub output_low_violations: usize,
    pub input_violations: usize,
    /// `max V − v_bound`; non-positive when the bound holds.
    pub v_excess: T,
    /// MPC cost increases beyond 1e-6 between waypoint switches.
    pub value_increases: usize,
    pub strict_lowlevel_output: bool,
    pub goal_reached_at: Option<T>,
}

impl<T: Real> MonitorSummary<T> {
    pub fn v_ok(&self) -> bool {
        self.v_excess <= T::lit(MONITOR_TOL)
    }

    pub fn passed(&self) -> bool {
        self.eps.passed
            && self.output_high_violations == 0
            && self.input_violations == 0
            && self.v_ok()
            && (!self.strict_lowlevel_output || self.output_low_violations == 0)
    }
}

impl<T: Real> TraceLog<T> {
    pub(crate) fn new(epsilon: T, rates: RatePair<T>, strict: bool) -> Self {
        Self {
            epsilon,
            rates,
            strict_lowlevel_output: strict,
            low: Vec::new(),
            at_high: Vec::new(),
            high: Vec::new(),
            v0: T::zero(),
            v_bound: T::zero(),
            goal_reached_at: None,
        }
    }

    pub(crate) fn push(&mut self, rec: LowRecord<T>, at_high: bool) {
        self.low.push(rec);
        self.at_high.push(at_high);
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    pub fn summary(&self) -> MonitorSummary<T> {
        let output_high_violations = self.low.iter().zip(&self.at_high).filter(|(r, &hi)| hi && !r.y_in_y).count();
        let output_low_violations = self.low.iter().filter(|r| !r.y_in_y).count();
        let input_violations = self.low.iter().filter(|r| !r.u_in_u).count();
        let v_max = self.low.iter().map(|r| r.v).fold(T::zero(), |a, b| a.max(b));
        let slack = T::lit(1e-6);
        let value_increases = self
            .high
            .windows(2)
            .filter(|w| w[0].cursor == w[1].cursor && w[0].piece == w[1].piece)
            .filter(|w| matches!((w[0].value, w[1].value), (Some(a), Some(b)) if b > a + slack))
            .count();
        MonitorSummary {
            eps: monitor_eps(self, self.epsilon),
            output_high_violations,
            output_low_violations,
            input_violations,
            v_excess: v_max - self.v_bound,
            value_increases,
            strict_lowlevel_output: self.strict_lowlevel_output,
            goal_reached_at: self.goal_reached_at,
        }
    }
}
