use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::polytope::HPolytope;
use crate::error::{dim_err, Error, PlanningSetKind, Result};
use crate::numerics::linalg::sym_inv_sqrt;
use crate::scalar::Real;
use crate::simfunc::SimFunction;

/// Eigenvalue floor below which `M` is rejected when forming `M^{-1/2}`.
pub const INV_SQRT_FLOOR: f64 = 1e-12;

fn row_norms<T: Real>(f: &DMatrix<T>) -> DVector<T> {
    DVector::from_iterator(f.nrows(), f.row_iter().map(|r| r.norm()))
}

fn row_l1_norms<T: Real>(f: &DMatrix<T>) -> DVector<T> {
    DVector::from_iterator(f.nrows(), f.row_iter().map(|r| r.iter().fold(T::zero(), |a, &x| a + x.abs())))
}

/// `X̄ ∩ {x̄ : F_y C̄ x̄ ≤ f_y − ε‖F_{y,j}‖}`.
pub fn tighten_output<T: Real>(y: &HPolytope<T>, cbar: &DMatrix<T>, xbar: &HPolytope<T>, epsilon: T) -> Result<HPolytope<T>> {
    if epsilon < T::zero() {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if cbar.nrows() != y.dim() {
        return Err(dim_err("tighten_output C̄ rows", y.dim(), cbar.nrows()));
    }
    if cbar.ncols() != xbar.dim() {
        return Err(dim_err("tighten_output C̄ cols", xbar.dim(), cbar.ncols()));
    }
    let rows = y.f() * cbar;
    let rhs = y.h() - row_norms(y.f()) * epsilon;
    xbar.with_rows(&rows, &rhs)
}

/// `‖G_{u,j}‖` for `G_u = F_u K M^{-1/2}`.
pub fn input_shrink_norms<T: Real>(u: &HPolytope<T>, k: &DMatrix<T>, m: &DMatrix<T>) -> Result<DVector<T>> {
    if k.nrows() != u.dim() {
        return Err(dim_err("tighten_input K rows", u.dim(), k.nrows()));
    }
    let m_isqrt = sym_inv_sqrt(m, T::lit(INV_SQRT_FLOOR))?;
    Ok(row_norms(&(u.f() * k * m_isqrt)))
}

/// `Ū ∩ {ū : F_u R ū ≤ f_u − δ‖F_{u,j}‖₁ − ε‖G_{u,j}‖}`.
pub fn tighten_input<T: Real>(
    u: &HPolytope<T>,
    r: &DMatrix<T>,
    k: &DMatrix<T>,
    m: &DMatrix<T>,
    epsilon: T,
    delta: T,
    ubar: &HPolytope<T>,
) -> Result<HPolytope<T>> {
    let g = input_shrink_norms(u, k, m)?;
    tighten_input_with(u, r, &g, epsilon, delta, ubar)
}

fn tighten_input_with<T: Real>(
    u: &HPolytope<T>,
    r: &DMatrix<T>,
    g: &DVector<T>,
    epsilon: T,
    delta: T,
    ubar: &HPolytope<T>,
) -> Result<HPolytope<T>> {
    if epsilon < T::zero() || delta < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "epsilon and delta must be non-negative, got {epsilon} and {delta}"
        )));
    }
    if r.nrows() != u.dim() || r.ncols() != ubar.dim() {
        return Err(dim_err(
            "tighten_input R",
            format!("{}x{}", u.dim(), ubar.dim()),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    let rows = u.f() * r;
    let rhs = u.h() - row_l1_norms(u.f()) * delta - g * epsilon;
    ubar.with_rows(&rows, &rhs)
}

/// `{x̄ : F_y C̄ x̄ ≤ f_y}`: the higher-layer states whose output lies in `y`.
pub fn xbar_from_output<T: Real>(y: &HPolytope<T>, cbar: &DMatrix<T>) -> Result<HPolytope<T>> {
    if cbar.nrows() != y.dim() {
        return Err(dim_err("xbar_from_output", y.dim(), cbar.nrows()));
    }
    HPolytope::new(y.f() * cbar, y.h().clone())
}

/// `X̄_p` of one piece: [`tighten_output`] plus `‖Qx̄‖_∞ ≤ δ`, whose rows are
/// left out when both `Q` and `δ` vanish.
pub fn tighten_state<T: Real>(
    q: &DMatrix<T>,
    y: &HPolytope<T>,
    cbar: &DMatrix<T>,
    xbar: &HPolytope<T>,
    epsilon: T,
    delta: T,
) -> Result<HPolytope<T>> {
    let base = tighten_output(y, cbar, xbar, epsilon)?;
    if q.ncols() != base.dim() {
        return Err(dim_err("tighten_state Q", base.dim(), q.ncols()));
    }
    if delta == T::zero() && q_vanishes(q) {
        return Ok(base);
    }
    let mq = q.nrows();
    let mut rows = DMatrix::zeros(2 * mq, q.ncols());
    for i in 0..mq {
        rows.set_row(2 * i, &q.row(i));
        rows.set_row(2 * i + 1, &(-q.row(i)));
    }
    base.with_rows(&rows, &DVector::from_element(2 * mq, delta))
}

/// Tightened sets for every piece of the safe region.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSets<T: Real> {
    pub xp: Vec<HPolytope<T>>,
    pub up: HPolytope<T>,
    /// `ε` used to tighten the sets.
    pub epsilon: T,
    /// `max(v0_max, γ·ū_max)`; equals `epsilon` unless `ε` was pinned.
    pub tracking_epsilon: T,
    pub delta: T,
    pub u_bar_max: T,
    pub v0_max: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningOptions<T: Real> {
    /// `δ`; defaults to zero when `Q = 0`, required otherwise.
    pub delta: Option<T>,
    /// Pins `ū_max` instead of solving for it.
    pub u_bar_max: Option<T>,
    /// Pins `ε` directly (e.g. zero to disable tightening).
    pub epsilon: Option<T>,
    /// Largest `√V` over the initial set.
    pub v0_max: T,
}

impl<T: Real> Default for PlanningOptions<T> {
    fn default() -> Self {
        Self {
            delta: None,
            u_bar_max: None,
            epsilon: None,
            v0_max: T::zero(),
        }
    }
}

/// Higher-layer data the propagation needs besides the certificate.
#[derive(Debug, Clone, Copy)]
pub struct PropagationProblem<'a, T: Real> {
    pub cbar: &'a DMatrix<T>,
    pub y_pieces: &'a [HPolytope<T>],
    pub u: &'a HPolytope<T>,
    /// One `X̄` per piece.
    pub xbar: &'a [HPolytope<T>],
    pub ubar: &'a HPolytope<T>,
}

fn max_vertex_norm<T: Real>(p: &HPolytope<T>) -> Option<T> {
    let v = p.vertices();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().map(|x| x.norm()).fold(T::zero(), |a, b| a.max(b)))
    }
}

/// `Ū_p` together with the precision it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPlanning<T: Real> {
    pub up: HPolytope<T>,
    pub epsilon: T,
    pub tracking_epsilon: T,
    pub delta: T,
    pub u_bar_max: T,
}

/// Entry size below which the lift feedforward `Q` counts as zero in double
/// precision.
pub const Q_ZERO_TOL: f64 = 1e-10;

/// `Q = 0` up to round-off from the lift solve.
pub fn q_vanishes<T: Real>(q: &DMatrix<T>) -> bool {
    q.amax() <= T::lit(Q_ZERO_TOL).max(T::machine_eps() * T::lit(1e3))
}

/// Chooses `ε`, `ū_max` and `Ū_p`: the smallest self-consistent `ū_max`
/// unless it or `ε` is pinned.
pub fn plan_inputs<T: Real>(sf: &SimFunction<T>, prob: &PropagationProblem<'_, T>, opts: &PlanningOptions<T>) -> Result<InputPlanning<T>> {
    let q = sf.q();
    let q_zero = q_vanishes(q);
    let delta = match opts.delta {
        Some(d) if d >= T::zero() => d,
        Some(d) => return Err(Error::InvalidArgument(format!("delta must be non-negative, got {d}"))),
        None if q_zero => T::zero(),
        None => return Err(Error::InvalidArgument("delta must be given when Q is nonzero".into())),
    };
    prob.ubar.ensure_bounded()?;
    let g = input_shrink_norms(prob.u, &sf.k, &sf.m)?;
    let up_at = |eps: T| tighten_input_with(prob.u, &sf.r, &g, eps, delta, prob.ubar);
    let eps_of = |u: T| opts.v0_max.max(sf.gamma * u);
    let empty_input = Error::EmptyPlanningSet {
        piece: 0,
        kind: PlanningSetKind::Input,
    };

    let (epsilon, u_bar_max) = match (opts.epsilon, opts.u_bar_max) {
        (Some(eps), _) => {
            let norm = max_vertex_norm(&up_at(eps)?).ok_or(empty_input)?;
            (eps, opts.u_bar_max.unwrap_or(norm))
        }
        (None, Some(pin)) => {
            let eps = eps_of(pin);
            let norm = max_vertex_norm(&up_at(eps)?).ok_or(empty_input)?;
            if norm > pin + T::lit(1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "pinned u_bar_max {pin} is below the max input norm {norm} of the planning set"
                )));
            }
            (eps, pin)
        }
        (None, None) => {
            // u ↦ max‖Ū_p(ε(u))‖ is non-increasing, so the smallest u with
            // u ≥ g(u) is found by bisection on [0, g(0)]
            let hi0 = max_vertex_norm(&up_at(eps_of(T::zero()))?).ok_or(empty_input.clone())?;
            let consistent = |u: T| -> Result<bool> {
                Ok(match max_vertex_norm(&up_at(eps_of(u))?) {
                    None => true,
                    Some(n) => u >= n,
                })
            };
            let (mut lo, mut hi) = (T::zero(), hi0);
            if !consistent(lo)? {
                let tol = T::lit(1e-13) * hi0.max(T::one());
                for _ in 0..200 {
                    if hi - lo <= tol || sf.gamma * (hi - lo) <= T::lit(1e-11) {
                        break;
                    }
                    let mid = (lo + hi) * T::lit(0.5);
                    if consistent(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            } else {
                hi = lo;
            }
            if max_vertex_norm(&up_at(eps_of(hi))?).is_none() {
                return Err(empty_input);
            }
            (eps_of(hi), hi)
        }
    };

    let up = up_at(epsilon)?;
    if up.is_empty()? {
        return Err(Error::EmptyPlanningSet {
            piece: 0,
            kind: PlanningSetKind::Input,
        });
    }
    Ok(InputPlanning {
        up,
        epsilon,
        tracking_epsilon: if opts.epsilon.is_some() { eps_of(u_bar_max) } else { epsilon },
        delta,
        u_bar_max,
    })
}

/// Builds `X̄_p` per piece and `Ū_p`; see [`plan_inputs`] for how `ε` is chosen.
pub fn build_planning_sets<T: Real>(
    sf: &SimFunction<T>,
    prob: &PropagationProblem<'_, T>,
    opts: &PlanningOptions<T>,
) -> Result<PlanningSets<T>> {
    if prob.y_pieces.len() != prob.xbar.len() {
        return Err(dim_err("build_planning_sets X̄ per piece", prob.y_pieces.len(), prob.xbar.len()));
    }
    if prob.y_pieces.is_empty() {
        return Err(Error::InvalidArgument("no safe-region pieces".into()));
    }
    let InputPlanning {
        up,
        epsilon,
        tracking_epsilon,
        delta,
        u_bar_max,
    } = plan_inputs(sf, prob, opts)?;
    let xp: Vec<Result<HPolytope<T>>> = prob
        .y_pieces
        .par_iter()
        .zip(prob.xbar.par_iter())
        .enumerate()
        .map(|(i, (y, xb))| {
            let p = tighten_state(sf.q(), y, prob.cbar, xb, epsilon, delta)?;
            if p.is_empty()? {
                return Err(Error::EmptyPlanningSet {
                    piece: i,
                    kind: PlanningSetKind::State,
                });
            }
            Ok(p)
        })
        .collect();
    let xp = xp.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PlanningSets {
        xp,
        up,
        epsilon,
        tracking_epsilon,
        delta,
        u_bar_max,
        v0_max: opts.v0_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn output_rows_shrink_by_epsilon() {
        let y = HPolytope::from_box(&[0.0, 0.0], &[10.0, 10.0]).unwrap();
        let xbar = HPolytope::from_box(&[-100.0, -100.0], &[100.0, 100.0]).unwrap();
        let t = tighten_output(&y, &eye(2), &xbar, 0.25).unwrap();
        let tail = t.h().rows(4, 4).into_owned();
        assert_eq!(tail.as_slice(), &[9.75, -0.25, 9.75, -0.25]);
        let same = tighten_output(&y, &eye(2), &xbar, 0.0).unwrap();
        assert_eq!(same.h().rows(4, 4).into_owned(), y.h().clone());
    }

    #[test]
    fn narrow_corridor_empties() {
        let y = HPolytope::from_box(&[0.0, 0.0], &[10.0, 0.75]).unwrap();
        let xbar = xbar_from_output(&y, &eye(2)).unwrap();
        let t = tighten_output(&y, &eye(2), &xbar, 0.4).unwrap();
        assert!(t.is_empty().unwrap());
        let t = tighten_output(&y, &eye(2), &xbar, 0.3).unwrap();
        assert!(!t.is_empty().unwrap());
    }

    #[test]
    fn input_rows_shrink_by_g_norm() {
        let u = HPolytope::from_box(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let ubar = HPolytope::from_box(&[-5.0, -5.0], &[5.0, 5.0]).unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        // G = F K M^{-1/2}: rows ±(1.5, 0) and ±(0, 0.5)
        let t = tighten_input(&u, &eye(2), &k, &m, 0.2, 0.0, &ubar).unwrap();
        let tail = t.h().rows(4, 4).into_owned();
        let want = [2.0 - 0.2 * 1.5, 2.0 - 0.2 * 1.5, 2.0 - 0.2 * 0.5, 2.0 - 0.2 * 0.5];
        for (a, b) in tail.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let same = tighten_input(&u, &eye(2), &k, &m, 0.0, 0.0, &ubar).unwrap();
        assert_eq!(same.h().rows(4, 4).into_owned(), u.h().clone());
        // large δ crosses zero
        let gone = tighten_input(&u, &eye(2), &k, &m, 0.0, 2.5, &ubar).unwrap();
        assert!(gone.is_empty().unwrap());
    }

    #[test]
    fn non_pd_m_rejected() {
        let u = HPolytope::from_box(&[-1.0], &[1.0]).unwrap();
        let r = tighten_input(&u, &eye(1), &eye(1), &DMatrix::from_element(1, 1, -1.0), 0.1, 0.0, &u);
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn monotone_in_epsilon() {
        let y = HPolytope::from_box(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        let xbar = xbar_from_output(&y, &eye(2)).unwrap();
        let a = tighten_output(&y, &eye(2), &xbar, 0.1).unwrap();
        let b = tighten_output(&y, &eye(2), &xbar, 0.2).unwrap();
        assert!(b.h().iter().zip(a.h().iter()).all(|(x, y)| x <= y));
    }
}
