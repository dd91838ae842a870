use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::{kron, solve_lstsq, unvec_cols, vec_cols};
use crate::scalar::Real;
use crate::systems::DtSystem;

/// Largest combined residual accepted for the lifting equations.
pub const LIFT_TOL: f64 = 1e-6;

/// Solution `(P, Q)` of `CP = C̄`, `PĀ = AP + BQ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftPair<T: Real> {
    pub p: DMatrix<T>,
    pub q: DMatrix<T>,
    pub residual_cp: T,
    pub residual_sylv: T,
}

impl<T: Real> LiftPair<T> {
    /// Residuals of an explicit pair against a lower/higher system.
    pub fn residuals(lower: &DtSystem<T>, higher: &DtSystem<T>, p: &DMatrix<T>, q: &DMatrix<T>) -> (T, T) {
        let cp = (lower.c() * p - higher.c()).norm();
        let sylv = (p * higher.ad() - lower.ad() * p - lower.bd() * q).norm();
        (cp, sylv)
    }

    /// Wraps a user-supplied pair after checking it.
    pub fn from_parts(lower: &DtSystem<T>, higher: &DtSystem<T>, p: DMatrix<T>, q: DMatrix<T>) -> Result<Self> {
        let (n, nb, m) = (lower.n_states(), higher.n_states(), lower.n_inputs());
        if p.shape() != (n, nb) {
            return Err(dim_err("LiftPair P", format!("{n}x{nb}"), format!("{}x{}", p.nrows(), p.ncols())));
        }
        if q.shape() != (m, nb) {
            return Err(dim_err("LiftPair Q", format!("{m}x{nb}"), format!("{}x{}", q.nrows(), q.ncols())));
        }
        let (residual_cp, residual_sylv) = Self::residuals(lower, higher, &p, &q);
        if (residual_cp + residual_sylv).as_f64() > LIFT_TOL {
            return Err(Error::LiftUnsolvable {
                residual: (residual_cp + residual_sylv).as_f64(),
            });
        }
        Ok(Self {
            p,
            q,
            residual_cp,
            residual_sylv,
        })
    }
}

/// Minimum-norm solution of the lifting equations, stacked as one linear
/// system in `(vec P, vec Q)`.
pub fn solve_lift<T: Real>(lower: &DtSystem<T>, higher: &DtSystem<T>) -> Result<LiftPair<T>> {
    if lower.n_outputs() != higher.n_outputs() {
        return Err(dim_err("solve_lift outputs", lower.n_outputs(), higher.n_outputs()));
    }
    let tol = T::lit(1e-9) * lower.period().max(higher.period());
    if (lower.period() - higher.period()).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "solve_lift: systems must share a period, got {} and {}",
            lower.period(),
            higher.period()
        )));
    }
    let n = lower.n_states();
    let nb = higher.n_states();
    let m = lower.n_inputs();
    let p_out = lower.n_outputs();
    let np = n * nb;
    let nq = m * nb;
    let i_nb = DMatrix::<T>::identity(nb, nb);
    let i_n = DMatrix::<T>::identity(n, n);

    let rows = p_out * nb + n * nb;
    let mut a = DMatrix::zeros(rows, np + nq);
    let mut rhs = DMatrix::zeros(rows, 1);
    // (I ⊗ C) vec P = vec C̄
    a.view_mut((0, 0), (p_out * nb, np)).copy_from(&kron(&i_nb, lower.c()));
    rhs.view_mut((0, 0), (p_out * nb, 1)).copy_from(&vec_cols(higher.c()));
    // (Āᵀ ⊗ I − I ⊗ A) vec P − (I ⊗ B) vec Q = 0
    let sylv = kron(&higher.ad().transpose(), &i_n) - kron(&i_nb, lower.ad());
    a.view_mut((p_out * nb, 0), (n * nb, np)).copy_from(&sylv);
    a.view_mut((p_out * nb, np), (n * nb, nq)).copy_from(&(-kron(&i_nb, lower.bd())));

    let sol = solve_lstsq(&a, &rhs)?;
    let v: DVector<T> = sol.x.column(0).into_owned();
    let p = unvec_cols(&v.as_slice()[..np], n, nb);
    let q = unvec_cols(&v.as_slice()[np..], m, nb);
    LiftPair::from_parts(lower, higher, p, q)
}
