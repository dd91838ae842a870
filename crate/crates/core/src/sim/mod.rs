//! Two-rate closed loop: the planner runs every `T_H`, the tracking
//! controller every `T_L`, and every guarantee is monitored on the way.

mod design;
mod trace;

pub use design::{sweep_frequencies, Design, SweepRow, Synthesis};
pub use trace::{monitor_eps, EpsVerdict, HighRecord, LowRecord, MonitorSummary, TraceLog};

use nalgebra::DVector;

use crate::constraints::{HPolytope, PlanningSets, SafeRegion};
use crate::error::{dim_err, Error, Result};
use crate::planner::{plan_step, Mission, PlannerConfig, STATE_TOL};
use crate::scalar::Real;
use crate::simfunc::SimFunction;
use crate::systems::{DtSystem, RatePair};

/// Slack allowed by the runtime monitors.
pub const MONITOR_TOL: f64 = 1e-9;

/// Initial higher/lower states.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPair<T: Real> {
    pub xbar0: DVector<T>,
    pub x0: DVector<T>,
}

impl<T: Real> InitPair<T> {
    /// `x₀ = P x̄₀`.
    pub fn lifted(sf: &SimFunction<T>, xbar0: DVector<T>) -> Self {
        let x0 = sf.p() * &xbar0;
        Self { xbar0, x0 }
    }

    /// Checks `C̄x̄₀ = Cx₀` and `Cx₀ ∈ Y`.
    pub fn validate(&self, lower: &DtSystem<T>, higher: &DtSystem<T>, y: &SafeRegion<T>) -> Result<()> {
        let yb = higher.output(&self.xbar0)?;
        let yl = lower.output(&self.x0)?;
        let gap = (&yb - &yl).amax();
        if gap > T::lit(1e-9) * yb.amax().max(T::one()) {
            return Err(Error::InvalidArgument(format!("initial outputs differ by {gap}")));
        }
        let (m, _) = y.margin(&yl)?;
        if m < -T::lit(MONITOR_TOL) {
            return Err(Error::InvalidArgument(format!("initial output lies outside Y by {}", -m)));
        }
        Ok(())
    }
}

/// Everything a closed-loop run needs.
#[derive(Debug, Clone, Copy)]
pub struct Setup<'a, T: Real> {
    /// Lower layer at `T_L`.
    pub lower: &'a DtSystem<T>,
    /// Higher layer at `T_L`.
    pub higher_l: &'a DtSystem<T>,
    /// Higher layer at `T_H`, used by the planner.
    pub higher_h: &'a DtSystem<T>,
    pub sf: &'a SimFunction<T>,
    pub ps: &'a PlanningSets<T>,
    pub y: &'a SafeRegion<T>,
    pub u: &'a HPolytope<T>,
    pub planner: &'a PlannerConfig<T>,
    pub rates: RatePair<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Count low-level output excursions as failures rather than observations.
    pub strict_lowlevel_output: bool,
}

/// A run that stopped early, with the trace up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("simulation stopped at high-level step {step}: {error}")]
pub struct SimError<T: Real> {
    pub step: usize,
    pub error: Error,
    pub partial: Box<TraceLog<T>>,
}

fn low_record<T: Real>(
    s: &Setup<'_, T>,
    t: T,
    xbar: &DVector<T>,
    ubar: &DVector<T>,
    x: &DVector<T>,
    eps: T,
) -> Result<LowRecord<T>> {
    let u = s.sf.eval_controller(ubar, xbar, x)?;
    let ybar = s.higher_l.output(xbar)?;
    let y = s.lower.output(x)?;
    let v = s.sf.eval_v(xbar, x)?;
    let dist = (&ybar - &y).norm();
    let tol = T::lit(MONITOR_TOL);
    Ok(LowRecord {
        t,
        eps_ok: dist <= eps + tol,
        y_in_y: s.y.margin(&y)?.0 >= -tol,
        u_in_u: s.u.margin(&u)?.0 >= -tol,
        xbar: xbar.clone(),
        ubar: ubar.clone(),
        x: x.clone(),
        u,
        ybar,
        y,
        v,
        dist,
    })
}

/// Runs the mission from `init`. The higher state between planner calls is
/// propagated at `T_L` under the held input, which agrees with the `T_H`
/// model at every planner step.
pub fn run<T: Real>(
    s: &Setup<'_, T>,
    mission: &Mission<T>,
    init: &InitPair<T>,
    opts: &RunOptions,
) -> std::result::Result<TraceLog<T>, SimError<T>> {
    let fail = |step: usize, error: Error, log: TraceLog<T>| SimError {
        step,
        error,
        partial: Box::new(log),
    };
    let mut log = TraceLog::new(s.ps.tracking_epsilon, s.rates, opts.strict_lowlevel_output);
    let n_bar = s.higher_l.n_states();
    if init.xbar0.len() != n_bar || init.x0.len() != s.lower.n_states() {
        return Err(fail(
            0,
            dim_err("run initial states", format!("{n_bar}/{}", s.lower.n_states()), format!("{}/{}", init.xbar0.len(), init.x0.len())),
            log,
        ));
    }
    let ratio = s.rates.ratio();
    let t_l = s.rates.t_l();
    let mut mission = mission.clone();
    mission.reset();
    let mut xbar = init.xbar0.clone();
    let mut x = init.x0.clone();
    let mut ubar = DVector::zeros(s.higher_l.n_inputs());
    log.v0 = s.sf.eval_v(&xbar, &x).unwrap_or(T::zero());
    log.v_bound = log.v0.max(s.sf.gamma * s.sf.gamma * s.ps.u_bar_max * s.ps.u_bar_max);

    for h in 0..s.rates.high_steps() {
        let t_h = T::from_count(h * ratio) * t_l;
        let ybar = match s.higher_l.output(&xbar) {
            Ok(y) => y,
            Err(e) => return Err(fail(h, e, log)),
        };
        let status = mission.advance_if(&ybar, |piece| {
            s.ps.xp.get(piece).and_then(|p| p.margin(&xbar).ok()).is_some_and(|(m, _)| m >= -T::lit(STATE_TOL))
        });
        if status.done && log.goal_reached_at.is_none() {
            log.goal_reached_at = Some(t_h);
        }
        let Some(xp) = s.ps.xp.get(status.piece) else {
            let e = Error::InvalidArgument(format!("mission refers to missing piece {}", status.piece));
            return Err(fail(h, e, log));
        };
        let plan = match plan_step(&xbar, &status.target, xp, &s.ps.up, s.higher_h, s.planner) {
            Ok(p) => p,
            Err(e) => {
                log.high.push(HighRecord {
                    h,
                    t: t_h,
                    piece: status.piece,
                    cursor: status.cursor,
                    value: None,
                    status: e.to_string(),
                });
                return Err(fail(h, e, log));
            }
        };
        ubar = plan.input;
        log.high.push(HighRecord {
            h,
            t: t_h,
            piece: status.piece,
            cursor: status.cursor,
            value: Some(plan.value),
            status: "ok".into(),
        });
        for l in 0..ratio {
            let t = T::from_count(h * ratio + l) * t_l;
            let rec = match low_record(s, t, &xbar, &ubar, &x, s.ps.tracking_epsilon) {
                Ok(r) => r,
                Err(e) => return Err(fail(h, e, log)),
            };
            let next = s.lower.step(&x, &rec.u).and_then(|xn| Ok((xn, s.higher_l.step(&xbar, &ubar)?)));
            if log.goal_reached_at.is_none() && mission.in_goal(&rec.ybar) {
                log.goal_reached_at = Some(t);
            }
            log.push(rec, l == 0);
            match next {
                Ok((xn, xbn)) => {
                    x = xn;
                    xbar = xbn;
                }
                Err(e) => return Err(fail(h, e, log)),
            }
        }
    }
    // closing record at t = T, reporting the controller input the held plan would produce
    let t_end = T::from_count(s.rates.high_steps() * ratio) * t_l;
    match low_record(s, t_end, &xbar, &ubar, &x, s.ps.tracking_epsilon) {
        Ok(rec) => {
            if log.goal_reached_at.is_none() && mission.in_goal(&rec.ybar) {
                log.goal_reached_at = Some(t_end);
            }
            log.push(rec, true);
        }
        Err(e) => return Err(fail(s.rates.high_steps(), e, log)),
    }
    Ok(log)
}
