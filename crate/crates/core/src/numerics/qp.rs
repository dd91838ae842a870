//! Dense convex quadratic programming.
//!
//! Strictly convex problems are solved with the Goldfarb–Idnani dual
//! active-set method, carrying the factor `J` (with `JJᵀ = H⁻¹`) and the
//! triangular `R` explicitly and updating both by Givens rotations. Merely
//! semidefinite Hessians are handled by a proximal-point outer loop around
//! the same kernel.

use nalgebra::{DMatrix, DVector};

use super::linalg::ensure_finite;
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// `min ½xᵀHx + gᵀx  s.t.  F x ≤ h,  E x = e`.
#[derive(Debug, Clone)]
pub struct QpProblem<T: Real> {
    pub h: DMatrix<T>,
    pub g: DVector<T>,
    pub f_ineq: DMatrix<T>,
    pub h_ineq: DVector<T>,
    pub f_eq: DMatrix<T>,
    pub h_eq: DVector<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(
        h: DMatrix<T>,
        g: DVector<T>,
        f_ineq: DMatrix<T>,
        h_ineq: DVector<T>,
        f_eq: DMatrix<T>,
        h_eq: DVector<T>,
    ) -> Result<Self> {
        let n = g.len();
        if h.nrows() != n || h.ncols() != n {
            return Err(dim_err("QpProblem H", format!("{n}x{n}"), format!("{}x{}", h.nrows(), h.ncols())));
        }
        if f_ineq.ncols() != n || f_ineq.nrows() != h_ineq.len() {
            return Err(dim_err(
                "QpProblem inequalities",
                format!("{}x{n}", h_ineq.len()),
                format!("{}x{}", f_ineq.nrows(), f_ineq.ncols()),
            ));
        }
        if f_eq.ncols() != n || f_eq.nrows() != h_eq.len() {
            return Err(dim_err(
                "QpProblem equalities",
                format!("{}x{n}", h_eq.len()),
                format!("{}x{}", f_eq.nrows(), f_eq.ncols()),
            ));
        }
        ensure_finite("QpProblem H", &h)?;
        ensure_finite("QpProblem Fineq", &f_ineq)?;
        ensure_finite("QpProblem Feq", &f_eq)?;
        if !g.iter().chain(h_ineq.iter()).chain(h_eq.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("QpProblem vectors"));
        }
        let asym = (&h - h.transpose()).amax();
        if asym > T::lit(1e-10) * h.amax().max(T::one()) {
            return Err(Error::InvalidArgument(format!("QpProblem: H is not symmetric (gap {asym})")));
        }
        Ok(Self { h, g, f_ineq, h_ineq, f_eq, h_eq })
    }

    /// Inequality-only problem.
    pub fn inequality(h: DMatrix<T>, g: DVector<T>, f_ineq: DMatrix<T>, h_ineq: DVector<T>) -> Result<Self> {
        let n = g.len();
        Self::new(h, g, f_ineq, h_ineq, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &DVector<T>) -> T {
        (x.transpose() * &self.h * x)[(0, 0)] * T::lit(0.5) + self.g.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T: Real> {
    pub x: DVector<T>,
    pub status: QpStatus,
    pub objective: T,
    /// Multipliers of `F x ≤ h` (non-negative at optimality).
    pub mu_ineq: DVector<T>,
    /// Multipliers of `E x = e`.
    pub nu_eq: DVector<T>,
    /// Largest of stationarity, primal infeasibility and complementarity.
    pub kkt_residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions<T: Real> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for QpOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-7),
            max_iter: 1000,
        }
    }
}

/// KKT residual of a candidate primal/dual pair.
pub fn kkt_residual<T: Real>(p: &QpProblem<T>, x: &DVector<T>, mu: &DVector<T>, nu: &DVector<T>) -> T {
    let grad = &p.h * x + &p.g + p.f_ineq.transpose() * mu + p.f_eq.transpose() * nu;
    let mut r = grad.amax();
    let slack = &p.h_ineq - &p.f_ineq * x;
    for (s, m) in slack.iter().zip(mu.iter()) {
        r = r.max((-*s).max(T::zero()));
        r = r.max((-*m).max(T::zero()));
        r = r.max((*m * *s).abs());
    }
    if !p.h_eq.is_empty() {
        r = r.max((&p.f_eq * x - &p.h_eq).amax());
    }
    r
}

/// Solves a convex QP; malformed inputs are the only error path.
pub fn solve_qp<T: Real>(p: &QpProblem<T>, opts: QpOptions<T>) -> Result<QpSolution<T>> {
    let n = p.dim();
    if n == 0 {
        let mut infeasible = p.h_ineq.iter().any(|&b| b < -opts.tol);
        infeasible |= p.h_eq.iter().any(|&b| b.abs() > opts.tol);
        return Ok(QpSolution {
            x: DVector::zeros(0),
            status: if infeasible { QpStatus::Infeasible } else { QpStatus::Optimal },
            objective: T::zero(),
            mu_ineq: DVector::zeros(p.h_ineq.len()),
            nu_eq: DVector::zeros(p.h_eq.len()),
            kkt_residual: T::zero(),
            iterations: 0,
        });
    }
    if let Some(chol) = nalgebra::Cholesky::new(p.h.clone()) {
        let min_pivot = chol.l_dirty().diagonal().iter().fold(T::max_value().unwrap_or(T::one()), |a, &b| a.min(b.abs()));
        let scale = p.h.amax().max(T::one());
        if min_pivot * min_pivot > T::lit(1e-12) * scale {
            return Ok(finish(p, gi_solve(&p.h, &p.g, p, opts.max_iter), opts));
        }
    }
    solve_proximal(p, opts)
}

fn finish<T: Real>(p: &QpProblem<T>, raw: RawSolution<T>, opts: QpOptions<T>) -> QpSolution<T> {
    let _ = opts;
    let kkt = kkt_residual(p, &raw.x, &raw.mu, &raw.nu);
    QpSolution {
        objective: p.objective(&raw.x),
        x: raw.x,
        status: raw.status,
        mu_ineq: raw.mu,
        nu_eq: raw.nu,
        kkt_residual: kkt,
        iterations: raw.iterations,
    }
}

/// Proximal-point iteration `x⁺ = argmin ½xᵀHx + gᵀx + ρ/2‖x − x_k‖²`.
fn solve_proximal<T: Real>(p: &QpProblem<T>, opts: QpOptions<T>) -> Result<QpSolution<T>> {
    let n = p.dim();
    let rho = T::lit(1e-4) * p.h.amax().max(T::one());
    let hp = &p.h + DMatrix::identity(n, n) * rho;
    let mut xk = DVector::zeros(n);
    let mut total = 0usize;
    let mut last: Option<RawSolution<T>> = None;
    for _ in 0..opts.max_iter.max(1) {
        let gk = &p.g - &xk * rho;
        let raw = gi_solve(&hp, &gk, p, opts.max_iter);
        total += raw.iterations;
        if raw.status == QpStatus::Infeasible {
            let mut sol = finish(p, raw, opts);
            sol.iterations = total;
            return Ok(sol);
        }
        let step = (&raw.x - &xk).amax();
        xk = raw.x.clone();
        last = Some(raw);
        let cand = last.as_ref().map(|r| kkt_residual(p, &r.x, &r.mu, &r.nu)).unwrap_or(T::zero());
        if step <= opts.tol * T::lit(1e-2) || cand <= opts.tol * T::lit(1e-2) {
            break;
        }
    }
    let mut raw = last.expect("at least one proximal step");
    raw.iterations = total;
    let mut sol = finish(p, raw, opts);
    if sol.status == QpStatus::Optimal && sol.kkt_residual > opts.tol {
        sol.status = QpStatus::MaxIter;
    }
    Ok(sol)
}

struct RawSolution<T: Real> {
    x: DVector<T>,
    mu: DVector<T>,
    nu: DVector<T>,
    status: QpStatus,
    iterations: usize,
}

/// Working state of the dual active-set method. Constraints are held in the
/// form `nᵀx ≥ b`.
struct ActiveSet<T: Real> {
    j: DMatrix<T>,
    r: DMatrix<T>,
    q: usize,
    /// Constraint ids: `Ok(i)` equality i (with sign), `Err(i)` inequality i.
    ids: Vec<ConstraintId>,
    u: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ConstraintId {
    Eq(usize, bool),
    Ineq(usize),
}

fn givens<T: Real>(a: T, b: T) -> Option<(T, T, T)> {
    let h = a.hypot(b);
    if h == T::zero() {
        None
    } else {
        Some((a / h, b / h, h))
    }
}

impl<T: Real> ActiveSet<T> {
    fn d_of(&self, normal: &DVector<T>) -> DVector<T> {
        self.j.tr_mul(normal)
    }

    /// Primal direction `z = J₂ d₂` and dual direction `r = R⁻¹ d₁`.
    fn directions(&self, d: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let n = self.j.nrows();
        let mut z = DVector::zeros(n);
        for c in self.q..n {
            z.axpy(d[c], &self.j.column(c), T::one());
        }
        let mut r = DVector::zeros(self.q);
        for i in (0..self.q).rev() {
            let mut acc = d[i];
            for k in i + 1..self.q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        (z, r)
    }

    fn add(&mut self, mut d: DVector<T>, id: ConstraintId, mult: T) -> bool {
        let n = self.j.nrows();
        for c in (self.q + 1..n).rev() {
            if let Some((cs, sn, h)) = givens(d[c - 1], d[c]) {
                d[c - 1] = h;
                d[c] = T::zero();
                for row in 0..n {
                    let a = self.j[(row, c - 1)];
                    let b = self.j[(row, c)];
                    self.j[(row, c - 1)] = cs * a + sn * b;
                    self.j[(row, c)] = -sn * a + cs * b;
                }
            }
        }
        if d[self.q].abs() <= T::machine_eps() * d.amax().max(T::one()) {
            return false;
        }
        for i in 0..=self.q {
            self.r[(i, self.q)] = d[i];
        }
        self.q += 1;
        self.ids.push(id);
        self.u.push(mult);
        true
    }

    fn drop_at(&mut self, l: usize) {
        let n = self.j.nrows();
        let q = self.q;
        for c in l..q - 1 {
            for i in 0..n {
                self.r[(i, c)] = self.r[(i, c + 1)];
            }
        }
        for i in 0..n {
            self.r[(i, q - 1)] = T::zero();
        }
        for c in l..q - 1 {
            if let Some((cs, sn, h)) = givens(self.r[(c, c)], self.r[(c + 1, c)]) {
                self.r[(c, c)] = h;
                self.r[(c + 1, c)] = T::zero();
                for k in c + 1..q - 1 {
                    let a = self.r[(c, k)];
                    let b = self.r[(c + 1, k)];
                    self.r[(c, k)] = cs * a + sn * b;
                    self.r[(c + 1, k)] = -sn * a + cs * b;
                }
                for row in 0..n {
                    let a = self.j[(row, c)];
                    let b = self.j[(row, c + 1)];
                    self.j[(row, c)] = cs * a + sn * b;
                    self.j[(row, c + 1)] = -sn * a + cs * b;
                }
            }
        }
        self.q -= 1;
        self.ids.remove(l);
        self.u.remove(l);
    }
}

fn gi_solve<T: Real>(hmat: &DMatrix<T>, g: &DVector<T>, p: &QpProblem<T>, max_iter: usize) -> RawSolution<T> {
    let n = g.len();
    let m_ineq = p.h_ineq.len();
    let m_eq = p.h_eq.len();
    let chol = nalgebra::Cholesky::new(hmat.clone()).expect("caller checked positive definiteness");
    let l = chol.l();
    let j = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .expect("non-singular Cholesky factor");
    let mut x = -chol.solve(g);
    let mut set = ActiveSet {
        j,
        r: DMatrix::zeros(n, n),
        q: 0,
        ids: Vec::new(),
        u: Vec::new(),
    };
    let mut iterations = 0usize;
    let ineq_normal = |i: usize| -> DVector<T> { -p.f_ineq.row(i).transpose() };
    let ineq_rhs = |i: usize| -> T { -p.h_ineq[i] };
    let row_norms: Vec<T> = (0..m_ineq).map(|i| p.f_ineq.row(i).norm().max(T::lit(1e-300_f64.max(f64::MIN_POSITIVE)))).collect();
    let feas_tol = |b: T| T::lit(1e-11) * (T::one() + b.abs());

    let pack = |set: &ActiveSet<T>, x: DVector<T>, status: QpStatus, iterations: usize| {
        let mut mu = DVector::zeros(m_ineq);
        let mut nu = DVector::zeros(m_eq);
        for (id, &u) in set.ids.iter().zip(set.u.iter()) {
            match *id {
                ConstraintId::Ineq(i) => mu[i] = u,
                // n = ±e; stationarity Hx + g = Σ u n  ⇒  ν = ∓u
                ConstraintId::Eq(i, flipped) => nu[i] = if flipped { u } else { -u },
            }
        }
        RawSolution { x, mu, nu, status, iterations }
    };

    // equalities first; they are never dropped
    for i in 0..m_eq {
        let e = p.f_eq.row(i).transpose();
        let resid = e.dot(&x) - p.h_eq[i];
        let (normal, rhs, flipped) = if resid > T::zero() {
            (-e, -p.h_eq[i], true)
        } else {
            (e, p.h_eq[i], false)
        };
        let d = set.d_of(&normal);
        let (z, r) = set.directions(&d);
        let zn = z.dot(&normal);
        let s = normal.dot(&x) - rhs;
        if zn.abs() <= T::lit(1e-14) * normal.norm() * normal.norm() {
            // linearly dependent on earlier equalities
            if s.abs() > T::lit(1e-9) * (T::one() + rhs.abs()) {
                return pack(&set, x, QpStatus::Infeasible, iterations);
            }
            continue;
        }
        let t = -s / zn;
        x.axpy(t, &z, T::one());
        for (uk, rk) in set.u.iter_mut().zip(r.iter()) {
            *uk -= t * *rk;
        }
        set.add(d, ConstraintId::Eq(i, flipped), t);
        iterations += 1;
    }

    loop {
        if iterations >= max_iter {
            return pack(&set, x, QpStatus::MaxIter, iterations);
        }
        // most violated inactive inequality, scaled by row norm
        let mut worst: Option<(usize, T)> = None;
        for i in 0..m_ineq {
            if set.ids.contains(&ConstraintId::Ineq(i)) {
                continue;
            }
            let s = ineq_normal(i).dot(&x) - ineq_rhs(i);
            if s < -feas_tol(ineq_rhs(i)) {
                let scaled = s / row_norms[i];
                if worst.is_none_or(|(_, w)| scaled < w) {
                    worst = Some((i, scaled));
                }
            }
        }
        let Some((pidx, _)) = worst else {
            return pack(&set, x, QpStatus::Optimal, iterations);
        };
        let np = ineq_normal(pidx);
        let bp = ineq_rhs(pidx);
        let mut up = T::zero();
        loop {
            iterations += 1;
            if iterations > max_iter {
                return pack(&set, x, QpStatus::MaxIter, iterations);
            }
            let d = set.d_of(&np);
            let (z, r) = set.directions(&d);
            let sp = np.dot(&x) - bp;
            // partial step limited by active inequality multipliers
            let mut t1: Option<(T, usize)> = None;
            for k in 0..set.q {
                if matches!(set.ids[k], ConstraintId::Ineq(_)) && r[k] > T::zero() {
                    let cand = set.u[k] / r[k];
                    if t1.is_none_or(|(t, _)| cand < t) {
                        t1 = Some((cand, k));
                    }
                }
            }
            let zn = z.dot(&np);
            let z_is_zero = z.amax() <= T::lit(1e-14) * np.amax().max(T::one()) || zn <= T::zero();
            let t2 = if z_is_zero { None } else { Some(-sp / zn) };
            match (t1, t2) {
                (None, None) => return pack(&set, x, QpStatus::Infeasible, iterations),
                (Some((t, l)), None) => {
                    for (uk, rk) in set.u.iter_mut().zip(r.iter()) {
                        *uk -= t * *rk;
                    }
                    up += t;
                    set.drop_at(l);
                }
                (t1, Some(t2v)) => {
                    let (t, partial) = match t1 {
                        Some((t1v, l)) if t1v < t2v => (t1v, Some(l)),
                        _ => (t2v, None),
                    };
                    x.axpy(t, &z, T::one());
                    for (uk, rk) in set.u.iter_mut().zip(r.iter()) {
                        *uk -= t * *rk;
                    }
                    up += t;
                    match partial {
                        None => {
                            let d = set.d_of(&np);
                            if !set.add(d, ConstraintId::Ineq(pidx), up) {
                                return pack(&set, x, QpStatus::Infeasible, iterations);
                            }
                            break;
                        }
                        Some(l) => set.drop_at(l),
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }
    fn m(r: usize, c: usize, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, x)
    }

    #[test]
    fn scalar_active_bound() {
        let p = QpProblem::inequality(m(1, 1, &[2.0]), v(&[0.0]), m(1, 1, &[-1.0]), v(&[-1.0])).unwrap();
        let s = solve_qp(&p, QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.mu_ineq[0], 2.0, epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-7);
    }

    #[test]
    fn unconstrained_newton_point() {
        let h = m(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let g = v(&[1.0, -1.0]);
        let p = QpProblem::inequality(h.clone(), g.clone(), DMatrix::zeros(0, 2), DVector::zeros(0)).unwrap();
        let s = solve_qp(&p, QpOptions::default()).unwrap();
        let expect = -h.lu().solve(&g).unwrap();
        assert_relative_eq!(s.x, expect, epsilon = 1e-12);
    }

    #[test]
    fn equality_and_inequality() {
        // min x² + y², x + y = 1, x ≥ 0.8
        let p = QpProblem::new(
            m(2, 2, &[2.0, 0.0, 0.0, 2.0]),
            v(&[0.0, 0.0]),
            m(1, 2, &[-1.0, 0.0]),
            v(&[-0.8]),
            m(1, 2, &[1.0, 1.0]),
            v(&[1.0]),
        )
        .unwrap();
        let s = solve_qp(&p, QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x, v(&[0.8, 0.2]), epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let p = QpProblem::inequality(m(1, 1, &[1.0]), v(&[0.0]), m(2, 1, &[1.0, -1.0]), v(&[0.0, -1.0])).unwrap();
        assert_eq!(solve_qp(&p, QpOptions::default()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn semidefinite_hessian_via_proximal() {
        // min x subject to 1 ≤ x ≤ 3, with zero curvature
        let p = QpProblem::inequality(m(1, 1, &[0.0]), v(&[1.0]), m(2, 1, &[1.0, -1.0]), v(&[3.0, -1.0])).unwrap();
        let s = solve_qp(&p, QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        assert!(QpProblem::inequality(m(2, 2, &[1.0, 1.0, 0.0, 1.0]), v(&[0.0, 0.0]), DMatrix::zeros(0, 2), DVector::zeros(0)).is_err());
    }

    #[test]
    fn degenerate_redundant_constraints() {
        // duplicated rows at the optimum
        let p = QpProblem::inequality(
            m(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            v(&[-2.0, -2.0]),
            m(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]),
            v(&[1.0, 1.0, 2.0]),
        )
        .unwrap();
        let s = solve_qp(&p, QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x, v(&[1.0, 1.0]), epsilon = 1e-10);
        assert!(s.kkt_residual <= 1e-7);
    }
}
