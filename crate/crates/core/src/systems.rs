//! Linear time-invariant systems and their zero-order-hold discretisations.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::{ensure_finite, expm};
use crate::scalar::Real;

/// Continuous-time system `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtSystem<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
}

fn check_abc<T: Real>(context: &'static str, a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare {
            context,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(dim_err(context, format!("B with {n} rows"), format!("{} rows", b.nrows())));
    }
    if c.ncols() != n {
        return Err(dim_err(context, format!("C with {n} columns"), format!("{} columns", c.ncols())));
    }
    if c.nrows() > n {
        return Err(Error::InvalidArgument(format!(
            "{context}: output dimension {} exceeds state dimension {n}",
            c.nrows()
        )));
    }
    ensure_finite(context, a)?;
    ensure_finite(context, b)?;
    ensure_finite(context, c)?;
    Ok(())
}

impl<T: Real> CtSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self> {
        check_abc("CtSystem", &a, &b, &c)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Block-diagonal stacking of independent subsystems.
    pub fn block_diag(parts: &[CtSystem<T>]) -> Result<Self> {
        let n: usize = parts.iter().map(|s| s.n_states()).sum();
        let m: usize = parts.iter().map(|s| s.n_inputs()).sum();
        let p: usize = parts.iter().map(|s| s.n_outputs()).sum();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, m);
        let mut c = DMatrix::zeros(p, n);
        let (mut i, mut j, mut k) = (0, 0, 0);
        for s in parts {
            a.view_mut((i, i), (s.n_states(), s.n_states())).copy_from(&s.a);
            b.view_mut((i, j), (s.n_states(), s.n_inputs())).copy_from(&s.b);
            c.view_mut((k, i), (s.n_outputs(), s.n_states())).copy_from(&s.c);
            i += s.n_states();
            j += s.n_inputs();
            k += s.n_outputs();
        }
        Self::new(a, b, c)
    }

    /// Chain of `order` integrators driven at the top, output the first state.
    pub fn integrator_chain(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("integrator chain needs order ≥ 1".into()));
        }
        let mut a = DMatrix::zeros(order, order);
        for i in 0..order - 1 {
            a[(i, i + 1)] = T::one();
        }
        let mut b = DMatrix::zeros(order, 1);
        b[(order - 1, 0)] = T::one();
        let mut c = DMatrix::zeros(1, order);
        c[(0, 0)] = T::one();
        Self::new(a, b, c)
    }
}

/// Discrete-time system `x⁺ = A_d x + B_d u`, `y = Cx`, sampled every
/// `period` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DtSystem<T: Real> {
    ad: DMatrix<T>,
    bd: DMatrix<T>,
    c: DMatrix<T>,
    period: T,
}

impl<T: Real> DtSystem<T> {
    pub fn new(ad: DMatrix<T>, bd: DMatrix<T>, c: DMatrix<T>, period: T) -> Result<Self> {
        check_abc("DtSystem", &ad, &bd, &c)?;
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!("sampling period must be positive, got {period}")));
        }
        Ok(Self { ad, bd, c, period })
    }

    pub fn ad(&self) -> &DMatrix<T> {
        &self.ad
    }
    pub fn bd(&self) -> &DMatrix<T> {
        &self.bd
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn period(&self) -> T {
        self.period
    }
    pub fn n_states(&self) -> usize {
        self.ad.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.bd.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self, x: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.n_states() {
            return Err(dim_err("DtSystem::step state", self.n_states(), x.len()));
        }
        if u.len() != self.n_inputs() {
            return Err(dim_err("DtSystem::step input", self.n_inputs(), u.len()));
        }
        Ok(&self.ad * x + &self.bd * u)
    }

    pub fn output(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.n_states() {
            return Err(dim_err("DtSystem::output", self.n_states(), x.len()));
        }
        Ok(&self.c * x)
    }
}

/// Exact zero-order-hold discretisation via `exp([[A, B], [0, 0]]·T)`.
pub fn discretize_zoh<T: Real>(sys: &CtSystem<T>, period: T) -> Result<DtSystem<T>> {
    if !(period > T::zero()) || !period.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling period must be positive, got {period}")));
    }
    let n = sys.n_states();
    let m = sys.n_inputs();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * period));
    aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * period));
    let e = expm(&aug)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    DtSystem::new(ad, bd, sys.c().clone(), period)
}

/// Lower-layer period, planner period and mission length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair<T: Real> {
    t_l: T,
    t_h: T,
    t_total: T,
    ratio: usize,
    horizon_steps: usize,
}

/// Relative tolerance on integer period ratios.
const RATIO_TOL: f64 = 1e-9;

fn integer_ratio<T: Real>(what: &str, num: T, den: T) -> Result<usize> {
    let r = (num / den).as_f64();
    let k = r.round();
    if k < 1.0 || (r - k).abs() > RATIO_TOL * k.max(1.0) {
        return Err(Error::InvalidArgument(format!("{what} must be a positive integer, got {r}")));
    }
    Ok(k as usize)
}

impl<T: Real> RatePair<T> {
    pub fn new(t_l: T, t_h: T, t_total: T) -> Result<Self> {
        for (name, v) in [("T_L", t_l), ("T_H", t_h), ("T", t_total)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = integer_ratio("T_H/T_L", t_h, t_l)?;
        let horizon_steps = integer_ratio("T/T_H", t_total, t_h)?;
        Ok(Self {
            t_l,
            t_h,
            t_total,
            ratio,
            horizon_steps,
        })
    }

    pub fn t_l(&self) -> T {
        self.t_l
    }
    pub fn t_h(&self) -> T {
        self.t_h
    }
    pub fn t_total(&self) -> T {
        self.t_total
    }
    /// Lower-layer steps per planner step.
    pub fn ratio(&self) -> usize {
        self.ratio
    }
    /// Planner steps in the mission.
    pub fn high_steps(&self) -> usize {
        self.horizon_steps
    }
}
