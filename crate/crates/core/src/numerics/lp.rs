use nalgebra::{DMatrix, DVector};

use super::conic::{solve_conic, ConicOptions, ConicProblem, ConicStatus};
use super::linalg::ensure_finite;
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Outcome of the phase-one feasibility problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LpFeasibility<T: Real> {
    /// `witness` is the Chebyshev centre; `radius` is the inscribed ball radius
    /// (capped, so unbounded sets report the cap).
    Feasible { witness: DVector<T>, radius: T },
    Infeasible,
}

impl<T: Real> LpFeasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpFeasibility::Feasible { .. })
    }
}

/// Radius below which an inscribed ball is treated as absent.
const MIN_RADIUS: f64 = 1e-9;

fn check_dims<T: Real>(context: &'static str, f: &DMatrix<T>, h: &DVector<T>) -> Result<()> {
    if f.nrows() != h.len() {
        return Err(dim_err(context, f.nrows(), h.len()));
    }
    ensure_finite(context, f)?;
    if !h.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Box half-width added to keep phase-one problems bounded.
fn box_width<T: Real>(f: &DMatrix<T>, h: &DVector<T>) -> T {
    let mut scale = T::one();
    for (r, &hr) in h.iter().enumerate() {
        let nr = f.row(r).norm();
        if nr > T::zero() {
            scale = scale.max(hr.abs() / nr);
        }
    }
    scale * T::lit(1e3)
}

/// Decides whether `{x : F x ≤ h}` has a non-empty interior and, if so,
/// returns its Chebyshev centre.
pub fn solve_lp_feasibility<T: Real>(f: &DMatrix<T>, h: &DVector<T>) -> Result<LpFeasibility<T>> {
    check_dims("solve_lp_feasibility", f, h)?;
    let n = f.ncols();
    let m = f.nrows();
    // rows with a zero normal are constant checks
    for r in 0..m {
        if f.row(r).norm() == T::zero() && h[r] < T::zero() {
            return Ok(LpFeasibility::Infeasible);
        }
    }
    let bw = box_width(f, h);
    // variables (x, r): F_j x + r‖F_j‖ ≤ h_j, |x_i| ≤ bw, 0 ≤ r ≤ bw
    let rows = m + 2 * n + 2;
    let mut a = DMatrix::zeros(rows, n + 1);
    let mut b = DVector::zeros(rows);
    for r in 0..m {
        a.view_mut((r, 0), (1, n)).copy_from(&f.row(r));
        a[(r, n)] = f.row(r).norm();
        b[r] = h[r];
    }
    for i in 0..n {
        a[(m + 2 * i, i)] = T::one();
        a[(m + 2 * i + 1, i)] = -T::one();
        b[m + 2 * i] = bw;
        b[m + 2 * i + 1] = bw;
    }
    a[(m + 2 * n, n)] = T::one();
    b[m + 2 * n] = bw;
    a[(m + 2 * n + 1, n)] = -T::one();
    b[m + 2 * n + 1] = T::zero();
    let mut c = DVector::zeros(n + 1);
    c[n] = T::one();
    let problem = ConicProblem::new(c, vec![], a, b)?;
    let opts = ConicOptions {
        gap_tol: T::lit(1e-10) * bw.max(T::one()),
        ..ConicOptions::default()
    };
    let sol = solve_conic(&problem, None, &opts);
    if sol.status == ConicStatus::Infeasible {
        return Ok(LpFeasibility::Infeasible);
    }
    let radius = sol.y[n];
    let witness = sol.y.rows(0, n).into_owned();
    let slack_ok = (h - f * &witness).iter().all(|&s| s > T::zero());
    if radius > T::lit(MIN_RADIUS) && slack_ok {
        Ok(LpFeasibility::Feasible { witness, radius })
    } else {
        Ok(LpFeasibility::Infeasible)
    }
}

/// Result of [`lp_maximize`].
#[derive(Debug, Clone)]
pub struct LpMax<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    /// The optimum pressed against the artificial box, i.e. the objective is
    /// unbounded above on the original set.
    pub unbounded: bool,
}

/// Maximises `cᵀx` over `{F x ≤ h}`; `None` when the set has empty interior.
pub fn lp_maximize<T: Real>(c: &DVector<T>, f: &DMatrix<T>, h: &DVector<T>) -> Result<Option<LpMax<T>>> {
    check_dims("lp_maximize", f, h)?;
    let n = f.ncols();
    if c.len() != n {
        return Err(dim_err("lp_maximize objective", n, c.len()));
    }
    let LpFeasibility::Feasible { witness, .. } = solve_lp_feasibility(f, h)? else {
        return Ok(None);
    };
    let bw = box_width(f, h) * T::lit(10.0);
    let m = f.nrows();
    let mut a = DMatrix::zeros(m + 2 * n, n);
    let mut b = DVector::zeros(m + 2 * n);
    a.view_mut((0, 0), (m, n)).copy_from(f);
    b.rows_mut(0, m).copy_from(h);
    for i in 0..n {
        a[(m + 2 * i, i)] = T::one();
        a[(m + 2 * i + 1, i)] = -T::one();
        b[m + 2 * i] = bw;
        b[m + 2 * i + 1] = bw;
    }
    let problem = ConicProblem::new(c.clone(), vec![], a, b)?;
    let opts = ConicOptions {
        gap_tol: T::lit(1e-11) * (T::one() + c.norm() * bw),
        ..ConicOptions::default()
    };
    let sol = solve_conic(&problem, Some(&witness), &opts);
    let unbounded = sol.y.iter().any(|&v| v.abs() >= bw * T::lit(0.5));
    Ok(Some(LpMax {
        value: c.dot(&sol.y),
        x: sol.y,
        unbounded,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, x)
    }

    #[test]
    fn unit_interval_centre() {
        let res = solve_lp_feasibility(&m(2, 1, &[1.0, -1.0]), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        match res {
            LpFeasibility::Feasible { witness, radius } => {
                assert!((witness[0] - 0.5).abs() < 1e-6);
                assert!((radius - 0.5).abs() < 1e-6);
            }
            LpFeasibility::Infeasible => panic!("should be feasible"),
        }
    }

    #[test]
    fn contradictory_bounds() {
        let res = solve_lp_feasibility(&m(2, 1, &[1.0, -1.0]), &DVector::from_vec(vec![0.0, -1.0])).unwrap();
        assert_eq!(res, LpFeasibility::Infeasible);
    }

    #[test]
    fn half_plane_is_feasible_and_unbounded() {
        let f = m(1, 2, &[1.0, 1.0]);
        let h = DVector::from_vec(vec![1.0]);
        assert!(solve_lp_feasibility(&f, &h).unwrap().is_feasible());
        let r = lp_maximize(&DVector::from_vec(vec![-1.0, 0.0]), &f, &h).unwrap().unwrap();
        assert!(r.unbounded);
        let r = lp_maximize(&DVector::from_vec(vec![1.0, 1.0]), &f, &h).unwrap().unwrap();
        assert!(!r.unbounded);
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maximise_over_triangle() {
        let f = m(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let h = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let r = lp_maximize(&DVector::from_vec(vec![2.0, 1.0]), &f, &h).unwrap().unwrap();
        assert!((r.value - 2.0).abs() < 1e-7);
        assert!(!r.unbounded);
    }
}
