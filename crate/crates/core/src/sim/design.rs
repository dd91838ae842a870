use rayon::prelude::*;

use crate::constraints::{build_planning_sets, plan_inputs, HPolytope, InputPlanning, PlanningOptions, PlanningSets, PropagationProblem};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simfunc::{assemble, AssembleOptions, SimFunction};
use crate::systems::{discretize_zoh, CtSystem, DtSystem, RatePair};

/// Continuous-time problem data from which every rate-dependent object is
/// rebuilt.
#[derive(Debug, Clone)]
pub struct Design<T: Real> {
    pub lower: CtSystem<T>,
    pub higher: CtSystem<T>,
    pub t_h: T,
    pub t_total: T,
    pub y_pieces: Vec<HPolytope<T>>,
    pub u: HPolytope<T>,
    pub ubar: HPolytope<T>,
    /// `X̄` per piece.
    pub xbar: Vec<HPolytope<T>>,
    pub assemble: AssembleOptions<T>,
    pub planning: PlanningOptions<T>,
}

/// Discretised systems and certificate at one tracking rate.
#[derive(Debug, Clone)]
pub struct Synthesis<T: Real> {
    pub rates: RatePair<T>,
    pub lower_l: DtSystem<T>,
    pub higher_l: DtSystem<T>,
    pub higher_h: DtSystem<T>,
    pub sf: SimFunction<T>,
}

impl<T: Real> Design<T> {
    pub fn rates(&self, t_l: T) -> Result<RatePair<T>> {
        RatePair::new(t_l, self.t_h, self.t_total)
    }

    pub fn synthesize(&self, t_l: T) -> Result<Synthesis<T>> {
        let rates = self.rates(t_l)?;
        let lower_l = discretize_zoh(&self.lower, t_l)?;
        let higher_l = discretize_zoh(&self.higher, t_l)?;
        let higher_h = discretize_zoh(&self.higher, self.t_h)?;
        let sf = assemble(&lower_l, &higher_l, &self.assemble)?;
        Ok(Synthesis {
            rates,
            lower_l,
            higher_l,
            higher_h,
            sf,
        })
    }

    fn problem<'a>(&'a self, syn: &'a Synthesis<T>) -> PropagationProblem<'a, T> {
        PropagationProblem {
            cbar: syn.higher_l.c(),
            y_pieces: &self.y_pieces,
            u: &self.u,
            xbar: &self.xbar,
            ubar: &self.ubar,
        }
    }

    pub fn precision(&self, syn: &Synthesis<T>) -> Result<InputPlanning<T>> {
        plan_inputs(&syn.sf, &self.problem(syn), &self.planning)
    }

    pub fn propagate(&self, syn: &Synthesis<T>) -> Result<PlanningSets<T>> {
        build_planning_sets(&syn.sf, &self.problem(syn), &self.planning)
    }
}

/// One cell of a frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: Real> {
    pub freq_hz: T,
    pub gamma: Option<T>,
    pub epsilon: Option<T>,
    pub u_bar_max: Option<T>,
    /// Synthesis succeeded and every planning set is nonempty.
    pub feasible: bool,
    pub error: Option<String>,
}

fn sweep_cell<T: Real>(design: &Design<T>, freq: T) -> SweepRow<T> {
    let mut row = SweepRow {
        freq_hz: freq,
        gamma: None,
        epsilon: None,
        u_bar_max: None,
        feasible: false,
        error: None,
    };
    if !(freq > T::zero()) {
        row.error = Some(Error::InvalidArgument(format!("frequency must be positive, got {freq}")).to_string());
        return row;
    }
    let syn = match design.synthesize(T::one() / freq) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.gamma = Some(syn.sf.gamma);
    match design.precision(&syn) {
        Ok(ip) => {
            row.epsilon = Some(ip.epsilon);
            row.u_bar_max = Some(ip.u_bar_max);
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    match design.propagate(&syn) {
        Ok(_) => row.feasible = true,
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Re-synthesises and re-propagates at every tracking frequency `1/T_L`;
/// failures are recorded per row and the sweep carries on.
pub fn sweep_frequencies<T: Real>(design: &Design<T>, freqs: &[T]) -> Vec<SweepRow<T>> {
    freqs.par_iter().map(|&f| sweep_cell(design, f)).collect()
}
