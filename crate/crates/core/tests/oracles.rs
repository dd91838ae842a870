//! Solver outputs against slow independent oracles.

use layercon::constraints::{max_norm_over, HPolytope};
use layercon::numerics::{expm, lyapunov_residual, solve_discrete_lyapunov, solve_qp, spectral_radius, QpOptions, QpProblem, QpStatus};
use layercon::systems::{discretize_zoh, CtSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Optimum of a strictly convex inequality QP by trying every active set of
/// size at most `n` and keeping the KKT points.
fn enumerate_qp(h: &DMatrix<f64>, g: &DVector<f64>, f: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = g.len();
    let m = f.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if act.len() > n {
            continue;
        }
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-g));
        for (j, &i) in act.iter().enumerate() {
            for c in 0..n {
                kkt[(n + j, c)] = f[(i, c)];
                kkt[(c, n + j)] = f[(i, c)];
            }
            rhs[n + j] = b[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = (f * &x - b).iter().all(|s| *s <= 1e-9);
        let dual_ok = (0..k).all(|j| sol[n + j] >= -1e-9);
        if feasible && dual_ok {
            let obj = 0.5 * (x.transpose() * h * &x)[(0, 0)] + g.dot(&x);
            if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                best = Some((x, obj));
            }
        }
    }
    best
}

#[test]
fn qp_matches_active_set_enumeration() {
    let mut rng = layercon::seeded_rng(11);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=7);
        let l = gauss(&mut rng, n, n);
        let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        let g = gauss(&mut rng, n, 1).column(0).into_owned() * 3.0;
        let f = gauss(&mut rng, m, n);
        // feasible by construction around a random point
        let x0 = gauss(&mut rng, n, 1).column(0).into_owned();
        let b = &f * &x0 + DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let p = QpProblem::inequality(h.clone(), g.clone(), f.clone(), b.clone()).unwrap();
        let sol = solve_qp(&p, QpOptions::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "trial {trial}");
        let (_, oracle) = enumerate_qp(&h, &g, &f, &b).expect("oracle finds the optimum");
        worst = worst.max((sol.objective - oracle).abs());
    }
    assert!(worst <= 1e-6, "objective gap {worst}");
}

#[test]
fn lyapunov_matches_series() {
    let mut rng = layercon::seeded_rng(12);
    for _ in 0..30 {
        let n = rng.random_range(1..=6);
        let raw = gauss(&mut rng, n, n);
        let rho = spectral_radius(&raw).unwrap().max(1e-9);
        let f = raw * (rng.random_range(0.1..0.8) / rho);
        let l = gauss(&mut rng, n, n);
        let q = &l * l.transpose() + DMatrix::identity(n, n);
        let sol = solve_discrete_lyapunov(&f, &q).unwrap();

        let mut series = DMatrix::zeros(n, n);
        let mut term = q.clone();
        for _ in 0..5000 {
            series += &term;
            term = f.transpose() * &term * &f;
            if term.norm() < 1e-18 {
                break;
            }
        }
        let gap = (&sol - &series).norm() / series.norm().max(1.0);
        assert!(gap <= 1e-8, "series gap {gap}");
        assert!(lyapunov_residual(&f, &sol, &q) <= 1e-8 * q.norm().max(1.0));
    }
}

/// Largest boundary radius found by shooting rays from the origin, refined by
/// golden-section search around the best sampled angle.
fn ray_radius(p: &HPolytope<f64>, theta: f64) -> f64 {
    let d = [theta.cos(), theta.sin()];
    let mut t = f64::INFINITY;
    for j in 0..p.n_rows() {
        let s = p.f()[(j, 0)] * d[0] + p.f()[(j, 1)] * d[1];
        if s > 0.0 {
            t = t.min(p.h()[j] / s);
        }
    }
    t
}

fn sampled_max_norm(p: &HPolytope<f64>) -> f64 {
    let n = 20_000;
    let tau = std::f64::consts::TAU;
    let (mut best, mut arg) = (0.0, 0.0);
    for k in 0..n {
        let th = tau * k as f64 / n as f64;
        let r = ray_radius(p, th);
        if r > best {
            best = r;
            arg = th;
        }
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (arg - tau / n as f64, arg + tau / n as f64);
    for _ in 0..80 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if ray_radius(p, x1) >= ray_radius(p, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.max(ray_radius(p, 0.5 * (a + b)))
}

#[test]
fn max_norm_matches_boundary_sampling() {
    let mut rng = layercon::seeded_rng(13);
    for _ in 0..40 {
        // random polygon containing the origin
        let m = rng.random_range(3..=8);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..m {
            let th = std::f64::consts::TAU * (k as f64 + rng.random_range(0.0..0.8)) / m as f64;
            rows.push(th.cos());
            rows.push(th.sin());
            rhs.push(rng.random_range(0.3..3.0));
        }
        let p = HPolytope::new(DMatrix::from_row_slice(m, 2, &rows), DVector::from_vec(rhs)).unwrap();
        if p.ensure_bounded().is_err() {
            continue;
        }
        let exact = max_norm_over(&p).unwrap();
        let sampled = sampled_max_norm(&p);
        assert!((exact - sampled).abs() <= 1e-6, "max norm {exact} vs sampled {sampled}");
    }
}

#[test]
fn zoh_semigroup_and_closed_form() {
    let mut rng = layercon::seeded_rng(14);
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let sys = CtSystem::new(gauss(&mut rng, n, n) * 0.5, gauss(&mut rng, n, m), gauss(&mut rng, 1, n)).unwrap();
        let t = rng.random_range(0.05..1.0);
        let full = discretize_zoh(&sys, t).unwrap();
        let half = discretize_zoh(&sys, t / 2.0).unwrap();
        let ad2 = half.ad() * half.ad();
        let bd2 = half.ad() * half.bd() + half.bd();
        assert!((full.ad() - ad2).amax() <= 1e-9);
        assert!((full.bd() - bd2).amax() <= 1e-9);
        assert!((full.ad() - expm(&(sys.a() * t)).unwrap()).amax() <= 1e-9);
    }
    // triple integrator: entries tᵏ/k!
    let t: f64 = 0.5;
    let d = discretize_zoh(&CtSystem::<f64>::integrator_chain(3).unwrap(), t).unwrap();
    let ad = DMatrix::from_row_slice(3, 3, &[1.0, t, t * t / 2.0, 0.0, 1.0, t, 0.0, 0.0, 1.0]);
    let bd = DMatrix::from_row_slice(3, 1, &[t.powi(3) / 6.0, t * t / 2.0, t]);
    assert!((d.ad() - ad).amax() <= 1e-12);
    assert!((d.bd() - bd).amax() <= 1e-12);
}
