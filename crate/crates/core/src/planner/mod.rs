//! Linear MPC for the higher layer and the waypoint cursor that feeds it.

mod mission;

pub use mission::{advance_mission, Mission, MissionStatus};

use nalgebra::{DMatrix, DVector};

use crate::constraints::HPolytope;
use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::{min_eigenvalue, symmetrize};
use crate::numerics::qp::{solve_qp, QpOptions, QpProblem, QpStatus};
use crate::scalar::Real;
use crate::systems::DtSystem;

/// How far outside `X̄_p` the current state may sit before planning refuses.
pub const STATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig<T: Real> {
    pub horizon: usize,
    /// Output tracking weight (p×p) on stages `1..N−1`.
    pub state_weight: DMatrix<T>,
    /// Input weight (m̄×m̄).
    pub input_weight: DMatrix<T>,
    /// Output weight on the last stage.
    pub terminal_weight: DMatrix<T>,
    pub waypoint_switch_radius: T,
}

impl<T: Real> PlannerConfig<T> {
    pub fn with_dims(outputs: usize, inputs: usize) -> Self {
        Self {
            horizon: 10,
            state_weight: DMatrix::identity(outputs, outputs),
            input_weight: DMatrix::identity(inputs, inputs) * T::lit(0.1),
            terminal_weight: DMatrix::identity(outputs, outputs) * T::lit(10.0),
            waypoint_switch_radius: T::lit(0.3),
        }
    }

    pub fn validate(&self, outputs: usize, inputs: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("planner horizon must be at least 1".into()));
        }
        for (name, w, d) in [
            ("state_weight", &self.state_weight, outputs),
            ("input_weight", &self.input_weight, inputs),
            ("terminal_weight", &self.terminal_weight, outputs),
        ] {
            if w.shape() != (d, d) {
                return Err(dim_err(name, format!("{d}x{d}"), format!("{}x{}", w.nrows(), w.ncols())));
            }
            if (w - w.transpose()).amax() > T::lit(1e-12) * w.amax().max(T::one()) {
                return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
            }
            if min_eigenvalue(w)? < -T::lit(1e-12) * w.amax().max(T::one()) {
                return Err(Error::InvalidArgument(format!("{name} is not positive semidefinite")));
            }
        }
        if !(self.waypoint_switch_radius > T::zero()) {
            return Err(Error::InvalidArgument("waypoint switch radius must be positive".into()));
        }
        Ok(())
    }
}

/// Solution of one planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<T: Real> {
    /// Input to apply now.
    pub input: DVector<T>,
    /// All `N` planned inputs.
    pub inputs: Vec<DVector<T>>,
    /// Predicted states `x̄_1 … x̄_N`.
    pub states: Vec<DVector<T>>,
    /// Optimal cost including the constant terms.
    pub value: T,
}

/// Condensed prediction matrices: `x_k = Sx_k x0 + Su_k U` for `k = 1..N`.
struct Prediction<T: Real> {
    sx: Vec<DMatrix<T>>,
    su: Vec<DMatrix<T>>,
}

fn predict<T: Real>(sys: &DtSystem<T>, n_steps: usize) -> Prediction<T> {
    let (a, b) = (sys.ad(), sys.bd());
    let (n, m) = (sys.n_states(), sys.n_inputs());
    let mut sx = Vec::with_capacity(n_steps);
    let mut su: Vec<DMatrix<T>> = Vec::with_capacity(n_steps);
    let mut ak = DMatrix::identity(n, n);
    for k in 0..n_steps {
        let mut row = match su.last() {
            Some(prev) => a * prev,
            None => DMatrix::zeros(n, m * n_steps),
        };
        row.view_mut((0, k * m), (n, m)).copy_from(b);
        ak = a * ak;
        sx.push(ak.clone());
        su.push(row);
    }
    Prediction { sx, su }
}

/// One receding-horizon step: minimises the weighted output tracking error
/// and input energy over the horizon subject to `x̄_k ∈ X̄_p` for every
/// predicted stage and `ū_k ∈ Ū_p` for every input.
pub fn plan_step<T: Real>(
    xbar: &DVector<T>,
    target: &DVector<T>,
    xp: &HPolytope<T>,
    up: &HPolytope<T>,
    sys_h: &DtSystem<T>,
    cfg: &PlannerConfig<T>,
) -> Result<Plan<T>> {
    let (n, m, p) = (sys_h.n_states(), sys_h.n_inputs(), sys_h.n_outputs());
    cfg.validate(p, m)?;
    if xbar.len() != n {
        return Err(dim_err("plan_step state", n, xbar.len()));
    }
    if target.len() != p {
        return Err(dim_err("plan_step target", p, target.len()));
    }
    if xp.dim() != n || up.dim() != m {
        return Err(dim_err("plan_step planning sets", format!("{n}/{m}"), format!("{}/{}", xp.dim(), up.dim())));
    }
    let (margin, _) = xp.margin(xbar)?;
    if margin < -T::lit(STATE_TOL) {
        return Err(Error::StateOutsidePlanningSet {
            violation: (-margin).as_f64(),
        });
    }

    let nh = cfg.horizon;
    let nu = nh * m;
    let pred = predict(sys_h, nh);
    let c = sys_h.c();
    let mut h = DMatrix::zeros(nu, nu);
    let mut g = DVector::zeros(nu);
    let mut constant = T::zero();
    for k in 0..nh {
        let w = if k + 1 == nh { &cfg.terminal_weight } else { &cfg.state_weight };
        let cu = c * &pred.su[k];
        let free = c * &pred.sx[k] * xbar - target;
        let wcu = w * &cu;
        h += cu.transpose() * &wcu * T::lit(2.0);
        g += wcu.transpose() * &free * T::lit(2.0);
        constant += (free.transpose() * w * &free)[(0, 0)];
    }
    for k in 0..nh {
        let mut blk = h.view_mut((k * m, k * m), (m, m));
        blk += &cfg.input_weight * T::lit(2.0);
    }
    let h = symmetrize(&h);

    let (dx, du) = (xp.n_rows(), up.n_rows());
    let mut f = DMatrix::zeros(nh * (dx + du), nu);
    let mut rhs = DVector::zeros(nh * (dx + du));
    for k in 0..nh {
        let r0 = k * dx;
        f.view_mut((r0, 0), (dx, nu)).copy_from(&(xp.f() * &pred.su[k]));
        rhs.rows_mut(r0, dx).copy_from(&(xp.h() - xp.f() * &pred.sx[k] * xbar));
        let r1 = nh * dx + k * du;
        f.view_mut((r1, k * m), (du, m)).copy_from(up.f());
        rhs.rows_mut(r1, du).copy_from(up.h());
    }
    let qp = QpProblem::inequality(h, g, f, rhs)?;
    let sol = solve_qp(&qp, QpOptions::default())?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => return Err(Error::PlannerInfeasible("constraints admit no input sequence".into())),
        QpStatus::MaxIter => {
            return Err(Error::PlannerInfeasible(format!(
                "QP stopped after {} iterations",
                sol.iterations
            )))
        }
    }
    let inputs: Vec<DVector<T>> = (0..nh).map(|k| sol.x.rows(k * m, m).into_owned()).collect();
    let states = (0..nh).map(|k| &pred.sx[k] * xbar + &pred.su[k] * &sol.x).collect();
    Ok(Plan {
        input: inputs[0].clone(),
        inputs,
        states,
        value: sol.objective + constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{discretize_zoh, CtSystem};

    fn di() -> DtSystem<f64> {
        discretize_zoh(&CtSystem::integrator_chain(2).unwrap(), 1.0).unwrap()
    }

    fn huge(k: usize) -> HPolytope<f64> {
        HPolytope::from_box(&vec![-1e6; k], &vec![1e6; k]).unwrap()
    }

    #[test]
    fn stationary_at_target() {
        let sys = di();
        let cfg = PlannerConfig::with_dims(1, 1);
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        let plan = plan_step(&x, &DVector::from_element(1, 1.0), &huge(2), &huge(1), &sys, &cfg).unwrap();
        assert!(plan.input.amax() < 1e-9);
        assert!(plan.value.abs() < 1e-9);
    }

    #[test]
    fn unconstrained_matches_batch_least_squares() {
        let sys = di();
        let cfg = PlannerConfig::with_dims(1, 1);
        let x = DVector::from_column_slice(&[0.3, -0.2]);
        let r = DVector::from_element(1, 2.0);
        let plan = plan_step(&x, &r, &huge(2), &huge(1), &sys, &cfg).unwrap();
        // oracle: stack weighted residual rows and solve the normal equations
        let nh = cfg.horizon;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut xs = x.clone();
        let (a, b, c) = (sys.ad(), sys.bd(), sys.c());
        let mut infl = DMatrix::<f64>::zeros(2, nh);
        for k in 0..nh {
            xs = a * &xs;
            infl = a * infl;
            infl.view_mut((0, k), (2, 1)).copy_from(b);
            let w: f64 = if k + 1 == nh { 10.0 } else { 1.0 };
            let row = (c * &infl) * w.sqrt();
            rows.push(row.row(0).transpose());
            rhs.push(w.sqrt() * (r[0] - (c * &xs)[0]));
        }
        for k in 0..nh {
            let mut e = DVector::zeros(nh);
            e[k] = 0.1f64.sqrt();
            rows.push(e);
            rhs.push(0.0);
        }
        let a_ls = DMatrix::from_columns(&rows).transpose();
        let b_ls = DVector::from_vec(rhs);
        let u = (a_ls.transpose() * &a_ls).lu().solve(&(a_ls.transpose() * b_ls)).unwrap();
        for k in 0..nh {
            assert!((plan.inputs[k][0] - u[k]).abs() < 1e-7, "{k}");
        }
    }

    #[test]
    fn saturates_at_tightened_bound() {
        let sys = di();
        let cfg = PlannerConfig::with_dims(1, 1);
        let xp = HPolytope::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        )
        .unwrap();
        let up = HPolytope::from_box(&[-0.5], &[0.5]).unwrap();
        let x = DVector::from_column_slice(&[0.0, 0.0]);
        let plan = plan_step(&x, &DVector::from_element(1, 3.0), &xp, &up, &sys, &cfg).unwrap();
        for s in &plan.states {
            assert!(xp.margin(s).unwrap().0 >= -1e-7);
        }
        for u in &plan.inputs {
            assert!(up.margin(u).unwrap().0 >= -1e-7);
        }
        let reach = plan.states.iter().map(|s| s[0]).fold(f64::MIN, f64::max);
        assert!((reach - 1.0).abs() < 1e-6, "{reach}");
    }

    #[test]
    fn outside_state_rejected() {
        let xp = HPolytope::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let r = plan_step(
            &DVector::from_column_slice(&[2.0, 0.0]),
            &DVector::from_element(1, 0.0),
            &xp,
            &huge(1),
            &di(),
            &PlannerConfig::with_dims(1, 1),
        );
        assert!(matches!(r, Err(Error::StateOutsidePlanningSet { .. })));
    }
}
