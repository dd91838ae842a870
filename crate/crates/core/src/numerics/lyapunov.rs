use nalgebra::{DMatrix, DVector};

use super::linalg::{ensure_finite, ensure_square, kron, spectral_radius, symmetrize, unvec_cols, vec_cols};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Solves `Fᵀ N F − N = −Q` for `N`.
///
/// The equation is vectorised as `(Fᵀ ⊗ Fᵀ − I) vec(N) = −vec(Q)` and solved
/// densely, which is fine for the state dimensions this crate targets.
pub fn solve_discrete_lyapunov<T: Real>(f: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square("solve_discrete_lyapunov", f)?;
    ensure_square("solve_discrete_lyapunov", q)?;
    ensure_finite("solve_discrete_lyapunov", q)?;
    let n = f.nrows();
    if q.nrows() != n {
        return Err(dim_err("solve_discrete_lyapunov", n, q.nrows()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rho = spectral_radius(f)?;
    if rho >= T::one() {
        return Err(Error::NotStable { radius: rho.as_f64() });
    }
    let ft = f.transpose();
    let lhs = kron(&ft, &ft) - DMatrix::<T>::identity(n * n, n * n);
    let rhs: DVector<T> = -vec_cols(q);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("solve_discrete_lyapunov: singular Kronecker system".into()))?;
    Ok(symmetrize(&unvec_cols(sol.as_slice(), n, n)))
}

/// Residual `‖FᵀNF − N + Q‖_F`.
pub fn lyapunov_residual<T: Real>(f: &DMatrix<T>, n: &DMatrix<T>, q: &DMatrix<T>) -> T {
    (f.transpose() * n * f - n + q).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_dynamics_returns_rhs() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let n = solve_discrete_lyapunov(&DMatrix::zeros(2, 2), &q).unwrap();
        assert_relative_eq!(n, q, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_scalar_recursion() {
        let a = [0.3, -0.7, 0.9];
        let f = DMatrix::from_diagonal(&DVector::from_column_slice(&a));
        let n = solve_discrete_lyapunov(&f, &DMatrix::identity(3, 3)).unwrap();
        for (i, ai) in a.iter().enumerate() {
            assert_relative_eq!(n[(i, i)], 1.0 / (1.0 - ai * ai), epsilon = 1e-12);
        }
    }

    #[test]
    fn unstable_is_rejected_with_radius() {
        let f = DMatrix::from_row_slice(1, 1, &[1.5]);
        match solve_discrete_lyapunov(&f, &DMatrix::identity(1, 1)) {
            Err(Error::NotStable { radius }) => assert!((radius - 1.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
