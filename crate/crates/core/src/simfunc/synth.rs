//! Synthesis of `(M, K, λ)` meeting `M ⪰ CᵀC` and
//! `A_clᵀ M A_cl ⪯ (1 − 2λ) M` with `A_cl = A + BK`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::linalg::{spectral_radius, symmetrize};
use crate::numerics::lyapunov::solve_discrete_lyapunov;
use crate::numerics::sdp::{sdp_max_min_eig, SdpOutcome, EPS_PD_DEFAULT};
use crate::scalar::Real;
use crate::systems::DtSystem;

/// Gains produced by either synthesis path.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains<T: Real> {
    pub m: DMatrix<T>,
    pub k: DMatrix<T>,
    pub lambda: T,
}

#[derive(Debug, Clone)]
pub struct LyapunovOptions<T: Real> {
    /// Fraction of the largest admissible decay rate, in (0, 1).
    pub beta: T,
    /// LQR state weight; identity when absent.
    pub lqr_q: Option<DMatrix<T>>,
    /// LQR input weight; identity when absent.
    pub lqr_r: Option<DMatrix<T>>,
    /// Ridge added to the Lyapunov right-hand side.
    pub ridge: T,
}

impl<T: Real> Default for LyapunovOptions<T> {
    fn default() -> Self {
        Self {
            beta: T::lit(0.9),
            lqr_q: None,
            lqr_r: None,
            ridge: T::lit(1e-8),
        }
    }
}

const RICCATI_MAX_ITER: usize = 100_000;

/// Discrete-time LQR gain `K` (with `u = Kx`) from the Riccati fixed point.
pub fn dlqr<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, q: &DMatrix<T>, r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let mut x = q.clone();
    let blow_up = T::lit(1e12);
    for _ in 0..RICCATI_MAX_ITER {
        let btx = b.transpose() * &x;
        let s = r + &btx * b;
        let gain = s
            .clone()
            .lu()
            .solve(&(&btx * a))
            .ok_or_else(|| Error::NotStabilizable("singular Riccati input term".into()))?;
        let next = symmetrize(&(a.transpose() * &x * a - a.transpose() * &x * b * &gain + q));
        let delta = (&next - &x).amax();
        let scale = next.amax();
        if !scale.is_finite() || scale > blow_up {
            return Err(Error::NotStabilizable("Riccati iteration diverged".into()));
        }
        x = next;
        if delta <= T::lit(1e-13).max(T::machine_eps() * T::lit(100.0)) * scale.max(T::one()) {
            let btx = b.transpose() * &x;
            let s = r + &btx * b;
            let k = s
                .lu()
                .solve(&(&btx * a))
                .ok_or_else(|| Error::NotStabilizable("singular Riccati input term".into()))?;
            return Ok(-k);
        }
    }
    Err(Error::NotStabilizable(format!(
        "Riccati iteration did not settle in {RICCATI_MAX_ITER} steps"
    )))
}

/// Constructive path: LQR gain, decay rate from the closed-loop spectral
/// radius, `M` from a discrete Lyapunov equation.
pub fn synth_lyapunov<T: Real>(lower: &DtSystem<T>, opts: &LyapunovOptions<T>) -> Result<Gains<T>> {
    if !(opts.beta > T::zero() && opts.beta < T::one()) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {}", opts.beta)));
    }
    let (a, b, c) = (lower.ad(), lower.bd(), lower.c());
    let n = lower.n_states();
    let m = lower.n_inputs();
    let q = opts.lqr_q.clone().unwrap_or_else(|| DMatrix::identity(n, n));
    let r = opts.lqr_r.clone().unwrap_or_else(|| DMatrix::identity(m, m));
    let k = dlqr(a, b, &q, &r)?;
    let acl = a + b * &k;
    let rho = spectral_radius(&acl)?;
    if rho >= T::one() {
        return Err(Error::NotStabilizable(format!("closed-loop spectral radius {rho}")));
    }
    let lambda = opts.beta * (T::one() - rho * rho) / T::lit(2.0);
    let acl_l = &acl / (T::one() - T::lit(2.0) * lambda).sqrt();
    let ctc = c.transpose() * c;
    let rhs = symmetrize(&(acl_l.transpose() * &ctc * &acl_l)) + DMatrix::identity(n, n) * opts.ridge;
    let nmat = solve_discrete_lyapunov(&acl_l, &rhs)?;
    Ok(Gains {
        m: symmetrize(&(nmat + ctc)),
        k,
        lambda,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions<T: Real> {
    pub eps_pd: T,
    /// Smallest decay rate tried.
    pub lambda_min: T,
    /// Bisection steps locating the feasibility edge.
    pub bisect_steps: usize,
    /// Golden-section steps over the feasible interval.
    pub golden_steps: usize,
}

impl<T: Real> Default for SdpOptions<T> {
    fn default() -> Self {
        Self {
            eps_pd: T::lit(EPS_PD_DEFAULT),
            lambda_min: T::lit(1e-3),
            bisect_steps: 10,
            golden_steps: 14,
        }
    }
}

/// One SDP trial.
#[derive(Debug, Clone)]
pub struct SdpTrial<T: Real> {
    pub lambda: T,
    pub gains: Option<Gains<T>>,
    pub score: T,
}

fn sdp_gains<T: Real>(lower: &DtSystem<T>, lambda: T, eps_pd: T) -> Result<Option<Gains<T>>> {
    match sdp_max_min_eig(lower.c(), lower.ad(), lower.bd(), lambda, eps_pd)? {
        SdpOutcome::Infeasible => Ok(None),
        SdpOutcome::Feasible(sol) => match sol.recover() {
            Ok((m, k)) => Ok(Some(Gains { m, k, lambda })),
            Err(_) => Ok(None),
        },
    }
}

/// SDP path: bisects for the largest feasible decay rate, then runs a
/// golden-section search over `λ` minimising `score` (lower is better).
/// Returns the best gains together with every trial made.
pub fn synth_sdp<T: Real>(
    lower: &DtSystem<T>,
    opts: &SdpOptions<T>,
    score: impl Fn(&Gains<T>) -> Result<T>,
) -> Result<(Gains<T>, Vec<SdpTrial<T>>)> {
    let mut trials: Vec<SdpTrial<T>> = Vec::new();
    let inf = T::max_value().unwrap_or(T::lit(1e300));
    let eval = |lambda: T, trials: &mut Vec<SdpTrial<T>>| -> Result<T> {
        let gains = sdp_gains(lower, lambda, opts.eps_pd)?;
        let s = match &gains {
            Some(g) => score(g).unwrap_or(inf),
            None => inf,
        };
        trials.push(SdpTrial { lambda, gains, score: s });
        Ok(s)
    };

    let half = T::lit(0.5);
    let mut lo = opts.lambda_min;
    if eval(lo, &mut trials)? >= inf && trials.last().is_none_or(|t| t.gains.is_none()) {
        // distinguish an unstabilisable pair from a solver failure
        let n = lower.n_states();
        let m = lower.n_inputs();
        dlqr(lower.ad(), lower.bd(), &DMatrix::identity(n, n), &DMatrix::identity(m, m))?;
        return Err(Error::SdpInfeasible(format!("no feasible point at lambda = {lo}")));
    }
    // feasibility is monotone in λ: bisect the edge below ½
    let mut hi = half;
    for _ in 0..opts.bisect_steps {
        let mid = (lo + hi) * half;
        eval(mid, &mut trials)?;
        if trials.last().is_some_and(|t| t.gains.is_some()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let edge = lo;

    // golden section on [λ_min, edge]
    let phi = (T::lit(5.0).sqrt() - T::one()) * half;
    let (mut a, mut b) = (opts.lambda_min, edge);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = eval(x1, &mut trials)?;
    let mut f2 = eval(x2, &mut trials)?;
    for _ in 0..opts.golden_steps {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1, &mut trials)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2, &mut trials)?;
        }
    }
    let best = trials
        .iter()
        .filter(|t| t.gains.is_some())
        .min_by(|x, y| x.score.partial_cmp(&y.score).unwrap_or(std::cmp::Ordering::Equal))
        .and_then(|t| t.gains.clone())
        .ok_or_else(|| Error::SdpInfeasible("no feasible decay rate found".into()))?;
    Ok((best, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sdp::lmi_slacks;

    fn scalar(a: f64, b: f64) -> DtSystem<f64> {
        DtSystem::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn scalar_riccati_matches_closed_form() {
        // x = a²x − a²b²x²/(1 + b²x) + 1 with a = 0.5, b = 1
        let (a, b): (f64, f64) = (0.5, 1.0);
        // a²x(1+b²x) − a²b²x² + (1 + b²x) = x(1 + b²x)  →  b²x² + (1 − a² − b²)x − 1 = 0
        let qa = b * b;
        let qb = 1.0 - a * a - b * b;
        let x = (-qb + (qb * qb + 4.0 * qa).sqrt()) / (2.0 * qa);
        let k_oracle = -(b * x * a) / (1.0 + b * b * x);
        let k = dlqr(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, b),
            &DMatrix::identity(1, 1),
            &DMatrix::identity(1, 1),
        )
        .unwrap();
        assert!((k[(0, 0)] - k_oracle).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_path_scalar_lmis() {
        let sys = scalar(0.5, 1.0);
        let g = synth_lyapunov(&sys, &LyapunovOptions::default()).unwrap();
        let (o, d) = lmi_slacks(sys.c(), sys.ad(), sys.bd(), &g.m, &g.k, g.lambda).unwrap();
        assert!(o >= -1e-8 && d >= -1e-8, "{o} {d}");
        assert!(g.lambda > 0.0 && g.lambda < 0.5);
    }

    #[test]
    fn contractive_system_keeps_valid_lmis() {
        let sys = scalar(0.2, 0.01);
        let g = synth_lyapunov(&sys, &LyapunovOptions::default()).unwrap();
        let (o, d) = lmi_slacks(sys.c(), sys.ad(), sys.bd(), &g.m, &g.k, g.lambda).unwrap();
        assert!(o >= -1e-8 && d >= -1e-8);
    }

    #[test]
    fn unstabilisable_is_named() {
        let sys = scalar(1.5, 0.0);
        assert!(matches!(
            synth_lyapunov(&sys, &LyapunovOptions::default()),
            Err(Error::NotStabilizable(_))
        ));
        assert!(matches!(
            synth_sdp(&sys, &SdpOptions::default(), |_| Ok(0.0)),
            Err(Error::NotStabilizable(_))
        ));
    }

    #[test]
    fn sdp_edge_stays_below_half() {
        let sys = scalar(0.5, 1.0);
        let (g, trials) = synth_sdp(&sys, &SdpOptions::default(), |g| Ok(g.m[(0, 0)])).unwrap();
        assert!(g.lambda < 0.5);
        let (o, d) = lmi_slacks(sys.c(), sys.ad(), sys.bd(), &g.m, &g.k, g.lambda).unwrap();
        assert!(o >= -1e-8 && d >= -1e-8);
        assert!(trials.iter().all(|t| t.lambda < 0.5));
    }
}
