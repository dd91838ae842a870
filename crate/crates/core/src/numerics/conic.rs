//! Small dense conic solver: maximise `cᵀy` over
//! `F_b(y) = F_b0 + Σ yᵢ F_bi ⪰ 0` (one entry per semidefinite block) and
//! `A y ≤ b`, by a primal log-barrier path-following method.
//!
//! A phase-one problem finds a strictly feasible start. Every iterate stays
//! strictly inside the cone, so returned points carry positive slack. The
//! feasible set must be bounded; callers add box rows where it is not.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::linalg::symmetrize;
use crate::error::{dim_err, Result};
use crate::scalar::Real;

/// Affine symmetric matrix function `F0 + Σ yᵢ Fᵢ`.
#[derive(Debug, Clone)]
pub struct LmiBlock<T: Real> {
    pub f0: DMatrix<T>,
    pub fi: Vec<DMatrix<T>>,
}

impl<T: Real> LmiBlock<T> {
    pub fn size(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, y: &DVector<T>) -> DMatrix<T> {
        let mut f = self.f0.clone();
        for (fi, &yi) in self.fi.iter().zip(y.iter()) {
            if yi != T::zero() {
                f.zip_apply(fi, |a, b| *a += b * yi);
            }
        }
        f
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem<T: Real> {
    pub c: DVector<T>,
    pub lmis: Vec<LmiBlock<T>>,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
}

impl<T: Real> ConicProblem<T> {
    pub fn new(c: DVector<T>, lmis: Vec<LmiBlock<T>>, a: DMatrix<T>, b: DVector<T>) -> Result<Self> {
        let n = c.len();
        for blk in &lmis {
            if blk.fi.len() != n {
                return Err(dim_err("ConicProblem LMI coefficients", n, blk.fi.len()));
            }
            let k = blk.size();
            if blk.f0.ncols() != k || blk.fi.iter().any(|f| f.nrows() != k || f.ncols() != k) {
                return Err(dim_err("ConicProblem LMI block", format!("{k}x{k}"), "mismatched"));
            }
        }
        if a.ncols() != n || a.nrows() != b.len() {
            return Err(dim_err("ConicProblem linear part", format!("{}x{n}", b.len()), format!("{}x{}", a.nrows(), a.ncols())));
        }
        Ok(Self { c, lmis, a, b })
    }

    pub fn nvars(&self) -> usize {
        self.c.len()
    }

    /// Barrier parameter: total cone dimension.
    fn degree(&self) -> usize {
        self.lmis.iter().map(|b| b.size()).sum::<usize>() + self.b.len()
    }

    /// Minimum slack over all cones (smallest eigenvalue or linear slack).
    pub fn min_slack(&self, y: &DVector<T>) -> T {
        let mut s = T::max_value().unwrap_or(T::one());
        for blk in &self.lmis {
            let f = symmetrize(&blk.eval(y));
            let e = nalgebra::SymmetricEigen::new(f);
            s = s.min(e.eigenvalues.iter().copied().fold(s, |a, b| a.min(b)));
        }
        let lin = &self.b - &self.a * y;
        for &v in lin.iter() {
            s = s.min(v);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct ConicSolution<T: Real> {
    pub status: ConicStatus,
    pub y: DVector<T>,
    pub objective: T,
    /// Upper bound on the suboptimality of `y`.
    pub gap: T,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ConicOptions<T: Real> {
    pub gap_tol: T,
    pub rel_gap_tol: T,
    pub mu: T,
    pub max_newton: usize,
}

impl<T: Real> Default for ConicOptions<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::lit(1e-9),
            rel_gap_tol: T::lit(1e-9),
            mu: T::lit(50.0),
            max_newton: 2000,
        }
    }
}

struct Eval<T: Real> {
    value: T,
}

/// Barrier value `−t·cᵀy − Σ log det F_b − Σ log(b − Ay)`, or `None`
/// outside the interior.
fn barrier_value<T: Real>(p: &ConicProblem<T>, y: &DVector<T>, t: T) -> Option<Eval<T>> {
    let mut v = -t * p.c.dot(y);
    for blk in &p.lmis {
        let f = symmetrize(&blk.eval(y));
        let ch = Cholesky::new(f)?;
        v -= ch.ln_determinant();
    }
    let s = &p.b - &p.a * y;
    for &si in s.iter() {
        if si <= T::zero() {
            return None;
        }
        v -= si.ln();
    }
    if v.is_finite() {
        Some(Eval { value: v })
    } else {
        None
    }
}

fn gradient_hessian<T: Real>(p: &ConicProblem<T>, y: &DVector<T>, t: T) -> Option<(DVector<T>, DMatrix<T>)> {
    let n = p.nvars();
    let mut g = -&p.c * t;
    let mut h = DMatrix::zeros(n, n);
    for blk in &p.lmis {
        let f = symmetrize(&blk.eval(y));
        let finv = Cholesky::new(f)?.inverse();
        // W_i = F⁻¹F_i and its transpose, skipping variables absent from the block
        let w: Vec<Option<(DMatrix<T>, DMatrix<T>)>> = blk
            .fi
            .iter()
            .map(|fi| {
                if fi.iter().all(|&x| x == T::zero()) {
                    None
                } else {
                    let wi = &finv * fi;
                    let wt = wi.transpose();
                    Some((wi, wt))
                }
            })
            .collect();
        for i in 0..n {
            let Some((wi, _)) = &w[i] else { continue };
            g[i] -= wi.trace();
            for j in i..n {
                let Some((_, wjt)) = &w[j] else { continue };
                // tr(Wi Wj) as a Frobenius product with Wjᵀ
                let tr = wi
                    .as_slice()
                    .iter()
                    .zip(wjt.as_slice())
                    .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                h[(i, j)] += tr;
                if i != j {
                    h[(j, i)] += tr;
                }
            }
        }
    }
    let s = &p.b - &p.a * y;
    for (r, &si) in s.iter().enumerate() {
        if si <= T::zero() {
            return None;
        }
        // rows are typically sparse (bounds on single variables)
        let nz: Vec<(usize, T)> = (0..n).filter_map(|k| {
            let v = p.a[(r, k)];
            (v != T::zero()).then_some((k, v))
        }).collect();
        let inv = T::one() / si;
        for &(k, v) in &nz {
            g[k] += inv * v;
            for &(l, w) in &nz {
                h[(k, l)] += inv * inv * v * w;
            }
        }
    }
    Some((g, h))
}

/// Newton direction with Jacobi scaling; a small ridge is added if the
/// Hessian is numerically singular.
fn newton_step<T: Real>(g: &DVector<T>, h: &DMatrix<T>) -> Option<DVector<T>> {
    let n = g.len();
    let d = DVector::from_iterator(n, h.diagonal().iter().map(|&x| {
        if x > T::zero() {
            T::one() / x.sqrt()
        } else {
            T::one()
        }
    }));
    let dm = DMatrix::from_diagonal(&d);
    let hs = &dm * h * &dm;
    let gs = g.component_mul(&d);
    let mut ridge = T::zero();
    for _ in 0..8 {
        let m = &hs + DMatrix::identity(n, n) * ridge;
        if let Some(ch) = Cholesky::<T, Dyn>::new(m) {
            let step = -ch.solve(&gs);
            if step.iter().all(|x| x.is_finite()) {
                return Some(step.component_mul(&d));
            }
        }
        ridge = if ridge == T::zero() { T::lit(1e-12) } else { ridge * T::lit(100.0) };
    }
    None
}

enum CenterOutcome {
    Done,
    Stalled,
}

/// Minimises the barrier for fixed `t`; `y` must be strictly feasible.
fn center<T: Real>(p: &ConicProblem<T>, y: &mut DVector<T>, t: T, budget: &mut usize) -> CenterOutcome {
    for _ in 0..100 {
        if *budget == 0 {
            return CenterOutcome::Stalled;
        }
        *budget -= 1;
        let Some((g, h)) = gradient_hessian(p, y, t) else {
            return CenterOutcome::Stalled;
        };
        let Some(dy) = newton_step(&g, &h) else {
            return CenterOutcome::Stalled;
        };
        let dec2 = -g.dot(&dy);
        if dec2 <= T::lit(1e-10) {
            return CenterOutcome::Done;
        }
        let Some(f0) = barrier_value(p, y, t) else {
            return CenterOutcome::Stalled;
        };
        let mut step = T::one();
        let mut decrease = None;
        for _ in 0..60 {
            let cand = &*y + &dy * step;
            if let Some(fc) = barrier_value(p, &cand, t) {
                if fc.value <= f0.value - T::lit(0.25) * step * dec2 {
                    *y = cand;
                    decrease = Some(f0.value - fc.value);
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        let noise = T::lit(1e-13) * (T::one() + f0.value.abs());
        match decrease {
            // no progress possible at working precision
            None => return if dec2 <= T::lit(1e-6) { CenterOutcome::Done } else { CenterOutcome::Stalled },
            Some(d) if d <= noise && dec2 <= T::lit(1e-6) => return CenterOutcome::Done,
            Some(_) => {}
        }
    }
    CenterOutcome::Done
}

/// Path following from a strictly feasible `y0`. `stop` may end the run early
/// after any centring step.
fn path_follow<T: Real>(
    p: &ConicProblem<T>,
    y0: DVector<T>,
    opts: &ConicOptions<T>,
    mut stop: impl FnMut(&DVector<T>, T) -> bool,
) -> ConicSolution<T> {
    let m = T::from_count(p.degree().max(1));
    let mut y = y0;
    let mut t = T::one();
    let mut budget = opts.max_newton;
    loop {
        let outcome = center(p, &mut y, t, &mut budget);
        let gap = m / t;
        let obj = p.c.dot(&y);
        if stop(&y, gap) {
            return ConicSolution {
                status: ConicStatus::Optimal,
                objective: obj,
                y,
                gap,
                newton_steps: opts.max_newton - budget,
            };
        }
        if gap <= opts.gap_tol + opts.rel_gap_tol * obj.abs() {
            return ConicSolution {
                status: ConicStatus::Optimal,
                objective: obj,
                y,
                gap,
                newton_steps: opts.max_newton - budget,
            };
        }
        if matches!(outcome, CenterOutcome::Stalled) {
            // centring stopped short; the iterate is still interior
            let status = if budget == 0 { ConicStatus::MaxIter } else { ConicStatus::Optimal };
            return ConicSolution {
                status,
                objective: obj,
                y,
                gap,
                newton_steps: opts.max_newton - budget,
            };
        }
        t *= opts.mu;
    }
}

/// Finds a point with strictly positive slack in every cone, starting the
/// search from `y0`.
pub fn find_interior<T: Real>(p: &ConicProblem<T>, y0: &DVector<T>, opts: &ConicOptions<T>) -> Option<DVector<T>> {
    let n = p.nvars();
    let s0 = p.min_slack(y0);
    if s0 > T::zero() {
        return Some(y0.clone());
    }
    // variables (y, τ): F_b(y) − τI ⪰ 0, Ay + τ1 ≤ b, τ ≤ 1
    let cap = T::one();
    let mut c = DVector::zeros(n + 1);
    c[n] = T::one();
    let lmis = p
        .lmis
        .iter()
        .map(|blk| {
            let k = blk.size();
            let mut fi = blk.fi.clone();
            fi.push(-DMatrix::identity(k, k));
            LmiBlock { f0: blk.f0.clone(), fi }
        })
        .collect();
    let rows = p.b.len();
    let mut a = DMatrix::zeros(rows + 1, n + 1);
    a.view_mut((0, 0), (rows, n)).copy_from(&p.a);
    for r in 0..rows {
        a[(r, n)] = T::one();
    }
    a[(rows, n)] = T::one();
    let mut b = DVector::zeros(rows + 1);
    b.rows_mut(0, rows).copy_from(&p.b);
    b[rows] = cap;
    let phase1 = ConicProblem { c, lmis, a, b };
    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(y0);
    start[n] = s0.min(cap) - T::one();
    let sol = path_follow(&phase1, start, opts, |y, gap| {
        let tau = y[n];
        // certified infeasible, or comfortably interior
        tau + gap < T::zero() || tau >= T::lit(0.5) * cap.min(tau + gap)
    });
    let tau = sol.y[n];
    if tau > T::zero() {
        let y = sol.y.rows(0, n).into_owned();
        if p.min_slack(&y) > T::zero() {
            return Some(y);
        }
    }
    None
}

/// Maximises `cᵀy`; `y0` seeds the phase-one search.
pub fn solve_conic<T: Real>(p: &ConicProblem<T>, y0: Option<&DVector<T>>, opts: &ConicOptions<T>) -> ConicSolution<T> {
    let n = p.nvars();
    let zero = DVector::zeros(n);
    let start = y0.unwrap_or(&zero);
    match find_interior(p, start, opts) {
        None => ConicSolution {
            status: ConicStatus::Infeasible,
            y: start.clone(),
            objective: T::zero(),
            gap: T::zero(),
            newton_steps: 0,
        },
        Some(y) => path_follow(p, y, opts, |_, _| false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_program_on_a_box() {
        // max x + y on [0,1]^2
        let p = ConicProblem::<f64>::new(
            DVector::from_vec(vec![1.0, 1.0]),
            vec![],
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]),
        )
        .unwrap();
        let s = solve_conic(&p, None, &ConicOptions::default());
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn max_min_eigenvalue_of_trace_one() {
        // y parametrises [[y0, y1], [y1, 1 − y0]]; maximise t with matrix ⪰ tI
        let f0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let f1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let f2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let f3 = -DMatrix::<f64>::identity(2, 2);
        let blk = LmiBlock { f0, fi: vec![f1, f2, f3] };
        let p = ConicProblem::new(
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            vec![blk],
            DMatrix::from_row_slice(1, 3, &[0.0, 0.0, -1.0]),
            DVector::from_vec(vec![10.0]),
        )
        .unwrap();
        let s = solve_conic(&p, None, &ConicOptions::default());
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-6, "{}", s.objective);
    }

    #[test]
    fn detects_empty_interval() {
        // x ≤ 0 and x ≥ 1
        let p = ConicProblem::<f64>::new(
            DVector::from_vec(vec![1.0]),
            vec![],
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        )
        .unwrap();
        assert_eq!(solve_conic(&p, None, &ConicOptions::default()).status, ConicStatus::Infeasible);
    }
}
