use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::ensure_finite;
use crate::numerics::lp::{lp_maximize, solve_lp_feasibility, LpFeasibility};
use crate::scalar::Real;

/// `{z : F z ≤ f}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope<T: Real> {
    f: DMatrix<T>,
    h: DVector<T>,
}

impl<T: Real> HPolytope<T> {
    pub fn new(f: DMatrix<T>, h: DVector<T>) -> Result<Self> {
        if f.nrows() != h.len() {
            return Err(dim_err("HPolytope", format!("{} bounds", f.nrows()), h.len()));
        }
        if f.nrows() == 0 {
            return Err(Error::InvalidArgument("HPolytope needs at least one halfspace".into()));
        }
        ensure_finite("HPolytope", &f)?;
        if !h.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("HPolytope bounds"));
        }
        Ok(Self { f, h })
    }

    /// Axis-aligned box `lo ≤ z ≤ hi`.
    pub fn from_box(lo: &[T], hi: &[T]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(dim_err("HPolytope::from_box", lo.len(), hi.len()));
        }
        let k = lo.len();
        let mut f = DMatrix::zeros(2 * k, k);
        let mut h = DVector::zeros(2 * k);
        for i in 0..k {
            f[(2 * i, i)] = T::one();
            h[2 * i] = hi[i];
            f[(2 * i + 1, i)] = -T::one();
            h[2 * i + 1] = -lo[i];
        }
        Self::new(f, h)
    }

    pub fn f(&self) -> &DMatrix<T> {
        &self.f
    }
    pub fn h(&self) -> &DVector<T> {
        &self.h
    }
    pub fn dim(&self) -> usize {
        self.f.ncols()
    }
    pub fn n_rows(&self) -> usize {
        self.f.nrows()
    }

    /// Stacks the rows of `other` below ours.
    pub fn intersect(&self, other: &HPolytope<T>) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(dim_err("HPolytope::intersect", self.dim(), other.dim()));
        }
        let (a, b) = (self.n_rows(), other.n_rows());
        let mut f = DMatrix::zeros(a + b, self.dim());
        f.view_mut((0, 0), (a, self.dim())).copy_from(&self.f);
        f.view_mut((a, 0), (b, self.dim())).copy_from(&other.f);
        let mut h = DVector::zeros(a + b);
        h.rows_mut(0, a).copy_from(&self.h);
        h.rows_mut(a, b).copy_from(&other.h);
        Self::new(f, h)
    }

    /// Appends rows `F z ≤ f`.
    pub fn with_rows(&self, f: &DMatrix<T>, h: &DVector<T>) -> Result<Self> {
        if f.nrows() == 0 {
            return Ok(self.clone());
        }
        self.intersect(&HPolytope::new(f.clone(), h.clone())?)
    }

    /// Row-wise slack `(f_j − F_j z)/‖F_j‖`; zero rows report their raw slack.
    pub fn normalized_slacks(&self, z: &DVector<T>) -> Result<DVector<T>> {
        if z.len() != self.dim() {
            return Err(dim_err("HPolytope point", self.dim(), z.len()));
        }
        let raw = &self.h - &self.f * z;
        Ok(DVector::from_iterator(
            raw.len(),
            raw.iter().enumerate().map(|(j, &s)| {
                let nr = self.f.row(j).norm();
                if nr > T::zero() {
                    s / nr
                } else {
                    s
                }
            }),
        ))
    }

    /// Smallest normalised slack and the row attaining it.
    pub fn margin(&self, z: &DVector<T>) -> Result<(T, usize)> {
        let s = self.normalized_slacks(z)?;
        let (idx, val) = s.argmin();
        Ok((val, idx))
    }

    pub fn contains(&self, z: &DVector<T>, tol: T) -> Result<bool> {
        Ok(self.margin(z)?.0 >= -tol)
    }

    /// Chebyshev centre and radius, or `None` when the interior is empty.
    pub fn chebyshev(&self) -> Result<Option<(DVector<T>, T)>> {
        Ok(match solve_lp_feasibility(&self.f, &self.h)? {
            LpFeasibility::Feasible { witness, radius } => Some((witness, radius)),
            LpFeasibility::Infeasible => None,
        })
    }

    /// Empty interior counts as empty.
    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.chebyshev()?.is_none())
    }

    /// Fails with the offending axis direction when the set is unbounded.
    pub fn ensure_bounded(&self) -> Result<()> {
        let k = self.dim();
        for dir in 0..2 * k {
            let mut c = DVector::zeros(k);
            c[dir / 2] = if dir % 2 == 0 { T::one() } else { -T::one() };
            if let Some(res) = lp_maximize(&c, &self.f, &self.h)? {
                if res.unbounded {
                    return Err(Error::Unbounded { direction: dir });
                }
            }
        }
        Ok(())
    }

    /// Vertices by intersecting every `k`-subset of rows and keeping the
    /// feasible, non-duplicate points.
    pub fn vertices(&self) -> Vec<DVector<T>> {
        let k = self.dim();
        let d = self.n_rows();
        let scale = self.h.amax().max(T::one());
        let tol = T::lit(1e-9) * scale;
        let mut out: Vec<DVector<T>> = Vec::new();
        if k == 0 || d < k {
            return out;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut a = DMatrix::zeros(k, k);
            let mut b = DVector::zeros(k);
            for (r, &j) in idx.iter().enumerate() {
                a.set_row(r, &self.f.row(j));
                b[r] = self.h[j];
            }
            let lu = a.clone().lu();
            let det = lu.determinant().abs();
            let norm = a.row_iter().fold(T::one(), |acc, r| acc * r.norm().max(T::lit(1e-300)));
            if det > T::lit(1e-12) * norm {
                if let Some(v) = lu.solve(&b) {
                    let feasible = (&self.f * &v - &self.h).iter().all(|&s| s <= tol);
                    if feasible && !out.iter().any(|w| (w - &v).amax() <= tol) {
                        out.push(v);
                    }
                }
            }
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] != i + d - k {
                    break;
                }
                if i == 0 {
                    return out;
                }
            }
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    /// Maximum Euclidean norm over the set, attained at a vertex.
    pub fn max_norm(&self) -> Result<T> {
        self.ensure_bounded()?;
        let v = self.vertices();
        if v.is_empty() {
            return Err(Error::InvalidArgument("max_norm_over: set is empty".into()));
        }
        Ok(v.iter().map(|x| x.norm()).fold(T::zero(), |a, b| a.max(b)))
    }
}

/// Free-function form of [`HPolytope::max_norm`].
pub fn max_norm_over<T: Real>(p: &HPolytope<T>) -> Result<T> {
    p.max_norm()
}

/// Union of polytopes; membership in any piece counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeRegion<T: Real> {
    pieces: Vec<HPolytope<T>>,
}

/// Closed-set slack tolerance used by membership queries.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

impl<T: Real> SafeRegion<T> {
    pub fn new(pieces: Vec<HPolytope<T>>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::InvalidArgument("safe region needs at least one piece".into()));
        };
        let k = first.dim();
        if let Some(bad) = pieces.iter().find(|p| p.dim() != k) {
            return Err(dim_err("SafeRegion piece", k, bad.dim()));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[HPolytope<T>] {
        &self.pieces
    }
    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    /// Best margin over pieces and the piece attaining it.
    pub fn margin(&self, z: &DVector<T>) -> Result<(T, usize)> {
        let mut best: Option<(T, usize)> = None;
        for (i, p) in self.pieces.iter().enumerate() {
            let (m, _) = p.margin(z)?;
            if best.is_none_or(|(b, _)| m > b) {
                best = Some((m, i));
            }
        }
        Ok(best.expect("non-empty region"))
    }
}

/// Either a single polytope or a union.
pub trait Region<T: Real> {
    fn region_margin(&self, z: &DVector<T>) -> Result<T>;
}

impl<T: Real> Region<T> for HPolytope<T> {
    fn region_margin(&self, z: &DVector<T>) -> Result<T> {
        Ok(self.margin(z)?.0)
    }
}

impl<T: Real> Region<T> for SafeRegion<T> {
    fn region_margin(&self, z: &DVector<T>) -> Result<T> {
        Ok(self.margin(z)?.0)
    }
}

/// `(inside, margin)`; closed sets, so a zero margin is inside.
pub fn membership<T: Real, R: Region<T> + ?Sized>(region: &R, z: &DVector<T>) -> Result<(bool, T)> {
    let m = region.region_margin(z)?;
    Ok((m >= -T::lit(MEMBERSHIP_TOL), m))
}
