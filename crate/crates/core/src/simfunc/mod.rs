//! Simulation functions of the higher-layer model by the lower-layer one,
//! their interface controllers and the resulting tracking precision.

pub mod lift;
pub mod synth;

use nalgebra::{DMatrix, DVector};

pub use lift::{solve_lift, LiftPair, LIFT_TOL};
pub use synth::{dlqr, synth_lyapunov, synth_sdp, Gains, LyapunovOptions, SdpOptions, SdpTrial};

use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::{solve_lstsq, spectral_norm, sym_sqrt};
use crate::numerics::sdp::lmi_slacks;
use crate::scalar::Real;
use crate::systems::DtSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMethod {
    Lyapunov,
    Sdp,
}

impl std::str::FromStr for SynthesisMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lyapunov" => Ok(Self::Lyapunov),
            "sdp" => Ok(Self::Sdp),
            other => Err(Error::InvalidArgument(format!("unknown synthesis method '{other}'"))),
        }
    }
}

impl std::fmt::Display for SynthesisMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lyapunov => "lyapunov",
            Self::Sdp => "sdp",
        })
    }
}

/// Feedforward input matrix together with a flag for the rank-deficient
/// fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardR<T: Real> {
    pub r: DMatrix<T>,
    pub pseudo_inverse: bool,
}

/// `R = (B_LᵀMB_L)⁻¹ B_LᵀM P B̄_L`, the minimiser of `‖M^{1/2}(B_L R − P B̄_L)‖`.
/// Falls back to the minimum-norm least-squares solution when `B_LᵀMB_L` is
/// singular.
pub fn optimal_r<T: Real>(lower: &DtSystem<T>, higher: &DtSystem<T>, lift: &LiftPair<T>, m: &DMatrix<T>) -> Result<FeedforwardR<T>> {
    let bl = lower.bd();
    let target = &lift.p * higher.bd();
    let gram = bl.transpose() * m * bl;
    let rhs = bl.transpose() * m * &target;
    let cond_ok = {
        let ev = crate::numerics::linalg::sym_eigenvalues(&gram)?;
        let lo = ev.first().copied().unwrap_or_else(T::zero);
        let hi = ev.last().copied().unwrap_or_else(T::zero);
        hi > T::zero() && lo > hi * T::lit(1e-12)
    };
    if cond_ok {
        if let Some(r) = gram.clone().cholesky().map(|c| c.solve(&rhs)) {
            return Ok(FeedforwardR { r, pseudo_inverse: false });
        }
    }
    let sol = solve_lstsq(&gram, &rhs)?;
    Ok(FeedforwardR {
        r: sol.x,
        pseudo_inverse: true,
    })
}

/// `√(1−λ)·‖M^{1/2}(B_L R − P B̄_L)‖ / λ`.
pub fn gamma_of<T: Real>(lower: &DtSystem<T>, higher: &DtSystem<T>, p: &DMatrix<T>, m: &DMatrix<T>, r: &DMatrix<T>, lambda: T) -> Result<T> {
    let mh = sym_sqrt(m)?;
    let lr = lower.bd() * r;
    let pb = p * higher.bd();
    let mut mismatch = &lr - &pb;
    // exact input matching leaves only round-off here
    let scale = lr.amax().max(pb.amax()).max(T::one());
    if mismatch.amax() <= T::machine_eps() * T::lit(1e3) * scale {
        mismatch.fill(T::zero());
    }
    Ok((T::one() - lambda).sqrt() * spectral_norm(&(mh * mismatch))? / lambda)
}

/// Certificate bundle: `V(x̄, x) = (x − Px̄)ᵀM(x − Px̄)` with interface
/// `u = Rū + Qx̄ + K(x − Px̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFunction<T: Real> {
    pub lift: LiftPair<T>,
    pub m: DMatrix<T>,
    pub k: DMatrix<T>,
    pub lambda: T,
    pub r: DMatrix<T>,
    pub gamma: T,
    pub method: SynthesisMethod,
    pub r_pseudo_inverse: bool,
}

/// Numerical health of a [`SimFunction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimFunctionCheck<T: Real> {
    /// Smallest eigenvalue of `M − CᵀC`.
    pub output_slack: T,
    /// Smallest eigenvalue of `(1 − 2λ)M − A_clᵀ M A_cl`.
    pub decay_slack: T,
    /// `|γ − formula|`.
    pub gamma_gap: T,
    pub residual_cp: T,
    pub residual_sylv: T,
}

impl<T: Real> SimFunctionCheck<T> {
    pub fn is_valid(&self, tol: T) -> bool {
        self.output_slack >= -tol && self.decay_slack >= -tol && self.gamma_gap <= T::lit(1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct AssembleOptions<T: Real> {
    pub method: SynthesisMethod,
    pub lyapunov: LyapunovOptions<T>,
    pub sdp: SdpOptions<T>,
}

impl<T: Real> Default for AssembleOptions<T> {
    fn default() -> Self {
        Self {
            method: SynthesisMethod::Lyapunov,
            lyapunov: LyapunovOptions::default(),
            sdp: SdpOptions::default(),
        }
    }
}

impl<T: Real> SimFunction<T> {
    /// Builds a certificate from explicit gains.
    pub fn from_gains(lower: &DtSystem<T>, higher: &DtSystem<T>, lift: LiftPair<T>, gains: Gains<T>, method: SynthesisMethod) -> Result<Self> {
        let ff = optimal_r(lower, higher, &lift, &gains.m)?;
        let gamma = gamma_of(lower, higher, &lift.p, &gains.m, &ff.r, gains.lambda)?;
        Ok(Self {
            lift,
            m: gains.m,
            k: gains.k,
            lambda: gains.lambda,
            r: ff.r,
            gamma,
            method,
            r_pseudo_inverse: ff.pseudo_inverse,
        })
    }

    pub fn p(&self) -> &DMatrix<T> {
        &self.lift.p
    }
    pub fn q(&self) -> &DMatrix<T> {
        &self.lift.q
    }

    pub fn check(&self, lower: &DtSystem<T>, higher: &DtSystem<T>) -> Result<SimFunctionCheck<T>> {
        let (output_slack, decay_slack) = lmi_slacks(lower.c(), lower.ad(), lower.bd(), &self.m, &self.k, self.lambda)?;
        let g = gamma_of(lower, higher, &self.lift.p, &self.m, &self.r, self.lambda)?;
        let (residual_cp, residual_sylv) = LiftPair::residuals(lower, higher, &self.lift.p, &self.lift.q);
        Ok(SimFunctionCheck {
            output_slack,
            decay_slack,
            gamma_gap: (g - self.gamma).abs(),
            residual_cp,
            residual_sylv,
        })
    }

    fn dims(&self, xbar: &DVector<T>, x: &DVector<T>) -> Result<()> {
        if xbar.len() != self.lift.p.ncols() {
            return Err(dim_err("SimFunction higher state", self.lift.p.ncols(), xbar.len()));
        }
        if x.len() != self.lift.p.nrows() {
            return Err(dim_err("SimFunction lower state", self.lift.p.nrows(), x.len()));
        }
        Ok(())
    }

    /// Tracking error `x − Px̄`.
    pub fn error(&self, xbar: &DVector<T>, x: &DVector<T>) -> Result<DVector<T>> {
        self.dims(xbar, x)?;
        Ok(x - &self.lift.p * xbar)
    }

    pub fn eval_v(&self, xbar: &DVector<T>, x: &DVector<T>) -> Result<T> {
        let e = self.error(xbar, x)?;
        Ok((e.transpose() * &self.m * &e)[(0, 0)].max(T::zero()))
    }

    pub fn eval_controller(&self, ubar: &DVector<T>, xbar: &DVector<T>, x: &DVector<T>) -> Result<DVector<T>> {
        let e = self.error(xbar, x)?;
        if ubar.len() != self.r.ncols() {
            return Err(dim_err("SimFunction higher input", self.r.ncols(), ubar.len()));
        }
        Ok(&self.r * ubar + &self.lift.q * xbar + &self.k * e)
    }
}

/// Lifting, gain synthesis, feedforward and `γ` in one call.
pub fn assemble<T: Real>(lower: &DtSystem<T>, higher: &DtSystem<T>, opts: &AssembleOptions<T>) -> Result<SimFunction<T>> {
    let lift = solve_lift(lower, higher)?;
    let gains = match opts.method {
        SynthesisMethod::Lyapunov => synth_lyapunov(lower, &opts.lyapunov)?,
        SynthesisMethod::Sdp => {
            let score = |g: &Gains<T>| {
                let ff = optimal_r(lower, higher, &lift, &g.m)?;
                gamma_of(lower, higher, &lift.p, &g.m, &ff.r, g.lambda)
            };
            synth_sdp(lower, &opts.sdp, score)?.0
        }
    };
    SimFunction::from_gains(lower, higher, lift, gains, opts.method)
}

/// `ε = max(v0_max, γ·ū_max)` and the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision<T: Real> {
    pub epsilon: T,
    pub u_bar_max: T,
    pub v0_max: T,
}

pub fn compute_precision<T: Real>(gamma: T, u_bar_max: T, v0_max: T) -> Result<Precision<T>> {
    if !(u_bar_max > T::zero()) || !u_bar_max.is_finite() {
        return Err(Error::InvalidArgument(format!("u_bar_max must be positive, got {u_bar_max}")));
    }
    if !(v0_max >= T::zero()) || !v0_max.is_finite() {
        return Err(Error::InvalidArgument(format!("v0_max must be non-negative, got {v0_max}")));
    }
    Ok(Precision {
        epsilon: v0_max.max(gamma * u_bar_max),
        u_bar_max,
        v0_max,
    })
}

/// `max √V` over a finite list of initial pairs (e.g. the vertices of the
/// initial set).
pub fn v0_max_over<T: Real>(sf: &SimFunction<T>, pairs: &[(DVector<T>, DVector<T>)]) -> Result<T> {
    let mut best = T::zero();
    for (xbar, x) in pairs {
        best = best.max(sf.eval_v(xbar, x)?.sqrt());
    }
    Ok(best)
}
