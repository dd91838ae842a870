//! Epigraph-form semidefinite program for the tracking-controller gains:
//!
//! ```text
//! max s  s.t.  s ≥ eps_pd,  M̃ ⪰ sI,
//!              [[I, C M̃], [M̃ Cᵀ, M̃]] ⪰ 0,
//!              [[M̃, A M̃ + B K̃], [(A M̃ + B K̃)ᵀ, (1 − 2λ) M̃]] ⪰ 0.
//! ```

use nalgebra::{DMatrix, DVector};

use super::conic::{solve_conic, ConicOptions, ConicProblem, ConicStatus, LmiBlock};
use super::linalg::{min_eigenvalue, spd_inverse, symmetrize};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Default lower bound on `s`.
pub const EPS_PD_DEFAULT: f64 = 1e-6;

/// Bound on every decision variable, keeping the barrier problem bounded.
const VAR_BOX: f64 = 1e4;

#[derive(Debug, Clone)]
pub struct SdpSolution<T: Real> {
    pub m_tilde: DMatrix<T>,
    pub k_tilde: DMatrix<T>,
    pub s: T,
}

impl<T: Real> SdpSolution<T> {
    /// `M = M̃⁻¹`, `K = K̃ M`.
    pub fn recover(&self) -> Result<(DMatrix<T>, DMatrix<T>)> {
        let m = spd_inverse(&self.m_tilde)?;
        let k = &self.k_tilde * &m;
        Ok((m, k))
    }
}

#[derive(Debug, Clone)]
pub enum SdpOutcome<T: Real> {
    Feasible(SdpSolution<T>),
    Infeasible,
}

/// Index layout of the decision vector `(vech M̃, vec K̃, s)`.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn n_sym(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
    fn total(&self) -> usize {
        self.n_sym() + self.n * self.m + 1
    }
    fn sym_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row-major upper triangle
        i * self.n - i * (i + 1) / 2 + j
    }
    fn k_index(&self, r: usize, c: usize) -> usize {
        self.n_sym() + r * self.n + c
    }
    fn s_index(&self) -> usize {
        self.total() - 1
    }
    /// Basis matrix `E_ij + E_ji` (or `E_ii`) of the symmetric variable.
    fn sym_basis<T: Real>(&self, i: usize, j: usize) -> DMatrix<T> {
        let mut e = DMatrix::zeros(self.n, self.n);
        e[(i, j)] = T::one();
        e[(j, i)] = T::one();
        e
    }
}

fn embed<T: Real>(size: usize, blocks: &[(usize, usize, &DMatrix<T>)]) -> DMatrix<T> {
    let mut out = DMatrix::zeros(size, size);
    for &(r, c, b) in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
    }
    out
}

/// Solves the epigraph problem for a fixed `λ ∈ (0, ½)`.
pub fn sdp_max_min_eig<T: Real>(
    c_out: &DMatrix<T>,
    a_l: &DMatrix<T>,
    b_l: &DMatrix<T>,
    lambda: T,
    eps_pd: T,
) -> Result<SdpOutcome<T>> {
    let n = a_l.nrows();
    if a_l.ncols() != n {
        return Err(Error::NotSquare {
            context: "sdp_max_min_eig",
            rows: a_l.nrows(),
            cols: a_l.ncols(),
        });
    }
    if b_l.nrows() != n {
        return Err(dim_err("sdp_max_min_eig B", n, b_l.nrows()));
    }
    if c_out.ncols() != n {
        return Err(dim_err("sdp_max_min_eig C", n, c_out.ncols()));
    }
    if !(lambda > T::zero() && lambda < T::lit(0.5)) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1/2), got {lambda}")));
    }
    if eps_pd <= T::zero() {
        return Err(Error::InvalidArgument(format!("eps_pd must be positive, got {eps_pd}")));
    }
    let m = b_l.ncols();
    let p = c_out.nrows();
    let lay = Layout { n, m };
    let nv = lay.total();
    let zero_nn = DMatrix::<T>::zeros(n, n);

    // M̃ − sI ⪰ 0
    let mut blk1 = LmiBlock {
        f0: zero_nn.clone(),
        fi: vec![zero_nn.clone(); nv],
    };
    // [[I, C M̃], [M̃ Cᵀ, M̃]] ⪰ 0
    let s2 = p + n;
    let mut blk2 = LmiBlock {
        f0: embed(s2, &[(0, 0, &DMatrix::identity(p, p))]),
        fi: vec![DMatrix::zeros(s2, s2); nv],
    };
    // [[M̃, A M̃ + B K̃], [·ᵀ, (1−2λ) M̃]] ⪰ 0
    let s3 = 2 * n;
    let mut blk3 = LmiBlock {
        f0: DMatrix::zeros(s3, s3),
        fi: vec![DMatrix::zeros(s3, s3); nv],
    };
    let shrink = T::one() - T::lit(2.0) * lambda;
    for i in 0..n {
        for j in i..n {
            let idx = lay.sym_index(i, j);
            let e = lay.sym_basis::<T>(i, j);
            blk1.fi[idx] = e.clone();
            let ce = c_out * &e;
            blk2.fi[idx] = embed(s2, &[(0, p, &ce), (p, 0, &ce.transpose()), (p, p, &e)]);
            let ae = a_l * &e;
            blk3.fi[idx] = embed(s3, &[(0, 0, &e), (0, n, &ae), (n, 0, &ae.transpose()), (n, n, &(&e * shrink))]);
        }
    }
    for r in 0..m {
        for c in 0..n {
            let idx = lay.k_index(r, c);
            let mut ek = DMatrix::<T>::zeros(m, n);
            ek[(r, c)] = T::one();
            let be = b_l * ek;
            blk3.fi[idx] = embed(s3, &[(0, n, &be), (n, 0, &be.transpose())]);
        }
    }
    blk1.fi[lay.s_index()] = -DMatrix::<T>::identity(n, n);

    // s ≥ eps_pd and a box on every variable
    let rows = 1 + 2 * nv;
    let mut a = DMatrix::zeros(rows, nv);
    let mut b = DVector::zeros(rows);
    a[(0, lay.s_index())] = -T::one();
    b[0] = -eps_pd;
    for v in 0..nv {
        a[(1 + 2 * v, v)] = T::one();
        a[(2 + 2 * v, v)] = -T::one();
        b[1 + 2 * v] = T::lit(VAR_BOX);
        b[2 + 2 * v] = T::lit(VAR_BOX);
    }
    let mut cvec = DVector::zeros(nv);
    cvec[lay.s_index()] = T::one();
    let problem = ConicProblem::new(cvec, vec![blk1, blk2, blk3], a, b)?;

    // start at M̃ = εI, K̃ = 0, s = ε/2 with a tiny ε; phase one takes it from there
    let mut y0 = DVector::zeros(nv);
    for i in 0..n {
        y0[lay.sym_index(i, i)] = T::lit(1e-3);
    }
    y0[lay.s_index()] = T::lit(5e-4).max(eps_pd * T::lit(2.0));
    let opts = ConicOptions {
        gap_tol: T::lit(1e-10),
        rel_gap_tol: T::lit(1e-6),
        ..ConicOptions::default()
    };
    let sol = solve_conic(&problem, Some(&y0), &opts);
    if sol.status == ConicStatus::Infeasible {
        return Ok(SdpOutcome::Infeasible);
    }
    let y = &sol.y;
    let mut mt = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = y[lay.sym_index(i, j)];
            mt[(i, j)] = v;
            mt[(j, i)] = v;
        }
    }
    let mut kt = DMatrix::zeros(m, n);
    for r in 0..m {
        for c in 0..n {
            kt[(r, c)] = y[lay.k_index(r, c)];
        }
    }
    let s = y[lay.s_index()];
    if s < eps_pd || min_eigenvalue(&mt)? <= T::zero() {
        return Ok(SdpOutcome::Infeasible);
    }
    Ok(SdpOutcome::Feasible(SdpSolution {
        m_tilde: symmetrize(&mt),
        k_tilde: kt,
        s,
    }))
}

/// Minimum-eigenvalue slacks of `M − CᵀC` and `(1 − 2λ)M − A_clᵀ M A_cl`,
/// the two conditions the recovered gains must meet (both ≥ 0 when valid).
pub fn lmi_slacks<T: Real>(
    c_out: &DMatrix<T>,
    a_l: &DMatrix<T>,
    b_l: &DMatrix<T>,
    m: &DMatrix<T>,
    k: &DMatrix<T>,
    lambda: T,
) -> Result<(T, T)> {
    let output = min_eigenvalue(&(m - c_out.transpose() * c_out))?;
    let acl = a_l + b_l * k;
    let decay = min_eigenvalue(&(m * (T::one() - T::lit(2.0) * lambda) - acl.transpose() * m * &acl))?;
    Ok((output, decay))
}
