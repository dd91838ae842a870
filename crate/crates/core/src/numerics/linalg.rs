//! Dense linear-algebra building blocks.
//!
//! Eigen-, Schur- and singular-value decompositions come from `nalgebra`;
//! this module wraps them behind the contracts the rest of the crate relies
//! on (explicit failure instead of silent garbage, symmetric matrix
//! functions, minimum-norm least squares).

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Iteration cap handed to the Schur and symmetric-eigen solvers.
const EIG_MAX_SWEEPS: usize = 10_000;

pub(crate) fn ensure_square<T: Real>(context: &'static str, a: &DMatrix<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            context,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn ensure_finite<T: Real>(context: &'static str, a: &DMatrix<T>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square("expm", a)?;
    ensure_finite("expm", a)?;
    if a.is_empty() {
        return Ok(a.clone());
    }
    let e = a.exp();
    if e.iter().all(|x| x.is_finite()) {
        Ok(e)
    } else {
        Err(Error::Overflow("expm"))
    }
}

/// Largest eigenvalue modulus, real or complex.
///
/// The matrix is reduced to Hessenberg form and driven to real Schur form
/// by shifted QR sweeps; eigenvalues are read off the 1x1 and 2x2 diagonal
/// blocks. Non-convergence is reported as an error.
pub fn spectral_radius<T: Real>(a: &DMatrix<T>) -> Result<T> {
    ensure_square("spectral_radius", a)?;
    ensure_finite("spectral_radius", a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(T::zero());
    }
    let schur = Schur::try_new(a.clone(), T::machine_eps(), EIG_MAX_SWEEPS).ok_or(
        Error::NoConvergence {
            what: "Schur QR iteration",
            iterations: EIG_MAX_SWEEPS,
        },
    )?;
    let (_, t) = schur.unpack();
    let mut radius = T::zero();
    let mut i = 0;
    while i < n {
        let is_block = i + 1 < n && t[(i + 1, i)] != T::zero();
        if is_block {
            // eigenvalues of [[a, b], [c, d]]
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = (p + s) / T::lit(2.0);
            let det = p * s - q * r;
            let disc = half_tr * half_tr - det;
            let m = if disc < T::zero() {
                // complex pair, |z|^2 = det
                det.abs().sqrt()
            } else {
                let root = disc.sqrt();
                (half_tr + root).abs().max((half_tr - root).abs())
            };
            radius = radius.max(m);
            i += 2;
        } else {
            radius = radius.max(t[(i, i)].abs());
            i += 1;
        }
    }
    Ok(radius)
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> Result<T> {
    ensure_finite("spectral_norm", a)?;
    if a.is_empty() {
        return Ok(T::zero());
    }
    let svd = SVD::try_new(a.clone(), false, false, T::machine_eps(), EIG_MAX_SWEEPS).ok_or(
        Error::NoConvergence {
            what: "SVD",
            iterations: EIG_MAX_SWEEPS,
        },
    )?;
    Ok(svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |acc, s| acc.max(s)))
}

/// Minimum-norm least-squares solution together with its residual norm.
#[derive(Debug, Clone)]
pub struct LstsqSolution<T: Real> {
    pub x: DMatrix<T>,
    /// Frobenius norm of `A X - B`.
    pub residual: T,
    pub rank: usize,
}

/// Solves `min ‖AX − B‖_F` and returns the minimum-norm minimiser.
///
/// Singular values below `max(rows, cols) · eps · σ_max` are treated as zero,
/// so rank deficiency yields the minimum-norm solution rather than an error.
pub fn solve_lstsq<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<LstsqSolution<T>> {
    if a.nrows() != b.nrows() {
        return Err(dim_err("solve_lstsq", a.nrows(), b.nrows()));
    }
    ensure_finite("solve_lstsq", a)?;
    ensure_finite("solve_lstsq", b)?;
    if a.ncols() == 0 {
        let residual = b.norm();
        return Ok(LstsqSolution {
            x: DMatrix::zeros(0, b.ncols()),
            residual,
            rank: 0,
        });
    }
    let svd = SVD::try_new(a.clone(), true, true, T::machine_eps(), EIG_MAX_SWEEPS).ok_or(
        Error::NoConvergence {
            what: "SVD",
            iterations: EIG_MAX_SWEEPS,
        },
    )?;
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |acc, s| acc.max(s));
    let cutoff = smax * T::machine_eps() * T::from_count(a.nrows().max(a.ncols()));
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let x = if smax == T::zero() {
        DMatrix::zeros(a.ncols(), b.ncols())
    } else {
        svd.solve(b, cutoff)
            .map_err(|e| Error::InvalidArgument(format!("solve_lstsq: {e}")))?
    };
    let residual = (a * &x - b).norm();
    Ok(LstsqSolution { x, residual, rank })
}

/// Symmetric part `(A + Aᵀ)/2`.
pub fn symmetrize<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::lit(0.5)
}

fn sym_eigen<T: Real>(context: &'static str, a: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    ensure_square(context, a)?;
    ensure_finite(context, a)?;
    SymmetricEigen::try_new(symmetrize(a), T::machine_eps(), EIG_MAX_SWEEPS).ok_or(
        Error::NoConvergence {
            what: "symmetric eigendecomposition",
            iterations: EIG_MAX_SWEEPS,
        },
    )
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<T>> {
    let eig = sym_eigen("sym_eigenvalues", a)?;
    let mut v: Vec<T> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue<T: Real>(a: &DMatrix<T>) -> Result<T> {
    Ok(sym_eigenvalues(a)?.first().copied().unwrap_or_else(T::zero))
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn max_eigenvalue<T: Real>(a: &DMatrix<T>) -> Result<T> {
    Ok(sym_eigenvalues(a)?.last().copied().unwrap_or_else(T::zero))
}

/// Applies `f` to the eigenvalues of a symmetric matrix: `V f(Λ) Vᵀ`.
pub fn sym_apply<T: Real>(
    context: &'static str,
    a: &DMatrix<T>,
    f: impl Fn(T) -> T,
) -> Result<DMatrix<T>> {
    let eig = sym_eigen(context, a)?;
    let v = &eig.eigenvectors;
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&x| f(x)));
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&d) * v.transpose())))
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn sym_sqrt<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    sym_apply("sym_sqrt", a, |x| x.max(T::zero()).sqrt())
}

/// `A^{-1/2}` of a symmetric positive definite matrix; eigenvalues at or
/// below `floor` are rejected.
pub fn sym_inv_sqrt<T: Real>(a: &DMatrix<T>, floor: T) -> Result<DMatrix<T>> {
    let lo = min_eigenvalue(a)?;
    if lo <= floor {
        return Err(Error::NotPositiveDefinite("sym_inv_sqrt"));
    }
    sym_apply("sym_inv_sqrt", a, |x| T::one() / x.sqrt())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square("spd_inverse", a)?;
    let chol = nalgebra::Cholesky::new(symmetrize(a)).ok_or(Error::NotPositiveDefinite("spd_inverse"))?;
    Ok(symmetrize(&chol.inverse()))
}

/// General inverse via LU.
pub fn inverse<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square("inverse", a)?;
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("inverse: matrix is singular".into()))
}

/// Kronecker product.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec_cols<T: Real>(a: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_cols`].
pub fn unvec_cols<T: Real>(v: &[T], rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, v)
}

/// Integer power by repeated squaring.
pub fn mat_pow<T: Real>(a: &DMatrix<T>, mut k: usize) -> DMatrix<T> {
    let mut result = DMatrix::identity(a.nrows(), a.ncols());
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&DMatrix::<f64>::zeros(3, 3)).unwrap();
        assert_relative_eq!(e, DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn expm_nilpotent_truncates() {
        let e = expm(&m(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(e, m(2, 2, &[1.0, 1.0, 0.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&m(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() <= 1e-12 * 1f64.exp());
        assert!((e[(1, 1)] - 2f64.exp()).abs() <= 1e-12 * 2f64.exp());
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_rejects_non_square_and_overflow() {
        assert!(matches!(
            expm(&DMatrix::<f64>::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            expm(&m(1, 1, &[1.0e4])),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn expm_in_single_precision() {
        let e = expm(&DMatrix::<f32>::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!((e[(0, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn spectral_radius_examples() {
        assert_relative_eq!(
            spectral_radius(&m(2, 2, &[0.5, 0.0, 0.0, -0.9])).unwrap(),
            0.9,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            spectral_radius(&m(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // z^2 - z + 0.5: roots (1 ± i)/2 from the quadratic formula, modulus sqrt(0.5)
        let (a, b, c) = (1.0_f64, -1.0, 0.5);
        let disc = b * b - 4.0 * a * c;
        let oracle = ((-b / (2.0 * a)).powi(2) + (-disc).sqrt().powi(2) / (4.0 * a * a)).sqrt();
        let companion = m(2, 2, &[0.0, 1.0, -0.5, 1.0]);
        let r = spectral_radius(&companion).unwrap();
        assert!((r - oracle).abs() <= 1e-8 * oracle);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_relative_eq!(spectral_norm(&DMatrix::<f64>::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(spectral_norm(&m(2, 2, &[3.0, 0.0, 0.0, -4.0])).unwrap(), 4.0, epsilon = 1e-14);
        let u = DVector::<f64>::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 1.0]);
        let uv = &u * v.transpose();
        let oracle = u.norm() * v.norm();
        assert!((spectral_norm(&uv).unwrap() - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn lstsq_identity_and_consistent() {
        let b = m(2, 1, &[1.0, 2.0]);
        let s = solve_lstsq(&DMatrix::identity(2, 2), &b).unwrap();
        assert_relative_eq!(s.x, b, epsilon = 1e-14);

        let a = m(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = m(2, 1, &[2.0, -1.0]);
        let s = solve_lstsq(&a, &(&a * &x)).unwrap();
        assert_relative_eq!(s.x, x, epsilon = 1e-12);
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn lstsq_inconsistent_matches_normal_equations() {
        let a = m(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = m(3, 1, &[1.0, 1.0, 0.0]);
        let s = solve_lstsq(&a, &b).unwrap();
        // normal-equations oracle
        let ata = a.transpose() * &a;
        let xn = ata.lu().solve(&(a.transpose() * &b)).unwrap();
        let dist = (&a * &xn - &b).norm();
        assert_relative_eq!(s.x, xn, epsilon = 1e-12);
        assert!((s.residual - dist).abs() < 1e-12);
        assert!(s.residual > 0.5);
    }

    #[test]
    fn lstsq_rank_deficient_is_min_norm() {
        let a = m(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = m(2, 1, &[2.0, 2.0]);
        let s = solve_lstsq(&a, &b).unwrap();
        assert_eq!(s.rank, 1);
        assert_relative_eq!(s.x, m(2, 1, &[1.0, 1.0]), epsilon = 1e-12);
    }

    #[test]
    fn inverse_square_root_roundtrip() {
        let a = m(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_inv_sqrt(&a, 1e-12).unwrap();
        let back = &r * &a * &r;
        assert_relative_eq!(back, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(sym_inv_sqrt(&m(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1e-12).is_err());
    }
}
