//! Sampling-based check that the tightened sets keep the lower layer safe:
//! `C̄x̄ + εe ∈ Y` and `Rū + Qx̄ + εKM^{-1/2}e ∈ U` for unit `e`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::polytope::HPolytope;
use super::propagation::{PlanningSets, INV_SQRT_FLOOR};
use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::sym_inv_sqrt;
use crate::scalar::Real;
use crate::simfunc::SimFunction;

/// Margin at or above which a condition counts as satisfied.
pub const CHECK_TOL: f64 = -1e-9;

/// Cap applied to unbounded directions of `X̄_p` before sampling.
const SAMPLE_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport<T: Real> {
    /// Smallest normalised slack seen.
    pub margin: T,
    /// Row of the target set attaining `margin`.
    pub worst_row: usize,
    pub samples: usize,
}

impl<T: Real> ConditionReport<T> {
    fn new() -> Self {
        Self {
            margin: T::max_value().unwrap_or(T::lit(1e300)),
            worst_row: 0,
            samples: 0,
        }
    }

    fn record(&mut self, set: &HPolytope<T>, z: &DVector<T>) -> Result<()> {
        let (m, row) = set.margin(z)?;
        self.samples += 1;
        if m < self.margin {
            self.margin = m;
            self.worst_row = row;
        }
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.margin >= T::lit(CHECK_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceReport<T: Real> {
    pub piece: usize,
    pub output: ConditionReport<T>,
    pub input: ConditionReport<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport<T: Real> {
    pub pieces: Vec<PieceReport<T>>,
}

impl<T: Real> PropagationReport<T> {
    pub fn passed(&self) -> bool {
        self.pieces.iter().all(|p| p.output.passed() && p.input.passed())
    }

    pub fn worst_margin(&self) -> T {
        self.pieces
            .iter()
            .flat_map(|p| [p.output.margin, p.input.margin])
            .fold(T::max_value().unwrap_or(T::lit(1e300)), |a, b| a.min(b))
    }
}

fn unit<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<T> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))));
        let n = v.norm();
        if n > T::lit(1e-12) {
            return v / n;
        }
    }
}

fn row_units<T: Real>(g: &DMatrix<T>) -> Vec<DVector<T>> {
    g.row_iter()
        .filter_map(|r| {
            let n = r.norm();
            (n > T::zero()).then(|| r.transpose() / n)
        })
        .collect()
}

/// Vertices plus ray-shot boundary points of a (capped) polytope.
fn boundary_samples<T: Real, R: Rng + ?Sized>(p: &HPolytope<T>, count: usize, rng: &mut R) -> Result<Vec<DVector<T>>> {
    let k = p.dim();
    let cap = T::lit(SAMPLE_CAP);
    let capped = p.intersect(&HPolytope::from_box(&vec![-cap; k], &vec![cap; k])?)?;
    let mut out = capped.vertices();
    if out.is_empty() {
        return Err(Error::InvalidArgument("cannot sample an empty planning set".into()));
    }
    let centre = out.iter().fold(DVector::zeros(k), |a, v| a + v) / T::from_count(out.len());
    for _ in 0..count {
        let d: DVector<T> = unit(rng, k);
        let fd = capped.f() * &d;
        let slack = capped.h() - capped.f() * &centre;
        let mut t = T::max_value().unwrap_or(T::lit(1e300));
        for j in 0..fd.len() {
            if fd[j] > T::zero() {
                t = t.min(slack[j].max(T::zero()) / fd[j]);
            }
        }
        out.push(&centre + d * t);
    }
    Ok(out)
}

/// Checks both inclusion conditions for every piece with `n_samples` random
/// boundary points and unit directions, plus every vertex paired with the
/// worst-case direction of each target row.
pub fn check_propagation_conditions<T: Real, R: Rng + ?Sized>(
    sf: &SimFunction<T>,
    cbar: &DMatrix<T>,
    ps: &PlanningSets<T>,
    y_pieces: &[HPolytope<T>],
    u: &HPolytope<T>,
    n_samples: usize,
    rng: &mut R,
) -> Result<PropagationReport<T>> {
    if y_pieces.len() != ps.xp.len() {
        return Err(dim_err("check_propagation_conditions pieces", ps.xp.len(), y_pieces.len()));
    }
    let eps = ps.epsilon;
    let km = &sf.k * sym_inv_sqrt(&sf.m, T::lit(INV_SQRT_FLOOR))?;
    let n = km.ncols();
    let p = cbar.nrows();
    let worst_u = row_units(&(u.f() * &km));
    let u_samples = boundary_samples(&ps.up, n_samples, rng)?;
    let mut pieces = Vec::with_capacity(y_pieces.len());
    for (i, (y, xp)) in y_pieces.iter().zip(&ps.xp).enumerate() {
        let x_samples = boundary_samples(xp, n_samples, rng)?;
        let n_vert = x_samples.len() - n_samples;
        let worst_y = row_units(y.f());

        let mut output = ConditionReport::new();
        for (s, xb) in x_samples.iter().enumerate() {
            let yb = cbar * xb;
            if s < n_vert {
                for e in &worst_y {
                    output.record(y, &(&yb + e * eps))?;
                }
            } else {
                output.record(y, &(&yb + unit::<T, R>(rng, p) * eps))?;
            }
        }

        let mut input = ConditionReport::new();
        let n_uvert = u_samples.len() - n_samples;
        for (s, ub) in u_samples.iter().enumerate() {
            let xb = &x_samples[s % x_samples.len()];
            let base = &sf.r * ub + sf.q() * xb;
            if s < n_uvert {
                for e in &worst_u {
                    input.record(u, &(&base + &km * e * eps))?;
                }
            } else {
                input.record(u, &(&base + &km * unit::<T, R>(rng, n) * eps))?;
            }
        }
        pieces.push(PieceReport { piece: i, output, input });
    }
    Ok(PropagationReport { pieces })
}
