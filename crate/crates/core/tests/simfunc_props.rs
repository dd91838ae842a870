mod common;

use layercon::constraints::HPolytope;
use layercon::simfunc::{SimFunction, SynthesisMethod};
use layercon::sim::Synthesis;
use layercon::systems::DtSystem;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut impl Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| { let z: f64 = StandardNormal.sample(rng); scale * z })
}

fn maze(method: SynthesisMethod, t_l: f64) -> Synthesis<f64> {
    common::maze_design(method).synthesize(t_l).unwrap()
}

fn output_bound_holds(syn: &Synthesis<f64>, xbar: &DVector<f64>, x: &DVector<f64>) -> bool {
    let v = syn.sf.eval_v(xbar, x).unwrap();
    let d = syn.higher_l.output(xbar).unwrap() - syn.lower_l.output(x).unwrap();
    v >= d.norm_squared() - 1e-10 * v.max(1.0)
}

fn next_v(sf: &SimFunction<f64>, lower: &DtSystem<f64>, higher: &DtSystem<f64>, xbar: &DVector<f64>, x: &DVector<f64>, ubar: &DVector<f64>) -> f64 {
    let u = sf.eval_controller(ubar, xbar, x).unwrap();
    let xn = lower.step(x, &u).unwrap();
    let xbn = higher.step(xbar, ubar).unwrap();
    sf.eval_v(&xbn, &xn).unwrap()
}

#[test]
fn output_bound_on_random_pairs() {
    for method in [SynthesisMethod::Sdp, SynthesisMethod::Lyapunov] {
        let syn = maze(method, 0.5);
        let mut rng = layercon::seeded_rng(21);
        for _ in 0..10_000 {
            let xbar = normal(&mut rng, 4, 3.0);
            let x = &syn.sf.lift.p * &xbar + normal(&mut rng, 6, 0.5);
            assert!(output_bound_holds(&syn, &xbar, &x));
        }
    }
}

#[test]
fn strict_decrease_above_input_level() {
    for method in [SynthesisMethod::Sdp, SynthesisMethod::Lyapunov] {
        let syn = maze(method, 0.5);
        let sf = &syn.sf;
        let mut rng = layercon::seeded_rng(22);
        let mut tested = 0;
        while tested < 10_000 {
            let xbar = normal(&mut rng, 4, 3.0);
            let x = &sf.lift.p * &xbar + normal(&mut rng, 6, 0.5);
            let v = sf.eval_v(&xbar, &x).unwrap();
            let dir = normal(&mut rng, 2, 1.0).normalize();
            let scale = rng.random_range(0.0..1.0) * v.sqrt() / sf.gamma.max(1e-12);
            let ubar = dir * scale;
            if sf.gamma * sf.gamma * ubar.norm_squared() >= v {
                continue;
            }
            tested += 1;
            let vn = next_v(sf, &syn.lower_l, &syn.higher_l, &xbar, &x, &ubar);
            assert!(vn < v, "V grew from {v} to {vn}");
        }
    }
}

/// Uniform sample of a bounded polytope by rejection from its vertex box.
fn sample_in(p: &HPolytope<f64>, rng: &mut impl Rng) -> DVector<f64> {
    let verts = p.vertices();
    let k = p.dim();
    let lo = DVector::from_fn(k, |i, _| verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min));
    let hi = DVector::from_fn(k, |i, _| verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max));
    loop {
        let z = DVector::from_fn(k, |i, _| if hi[i] > lo[i] { rng.random_range(lo[i]..=hi[i]) } else { lo[i] });
        if p.contains(&z, 0.0).unwrap() {
            return z;
        }
    }
}

#[test]
fn rollouts_stay_within_precision() {
    let design = common::maze_design(SynthesisMethod::Sdp);
    let syn = design.synthesize(0.5).unwrap();
    let ps = design.propagate(&syn).unwrap();
    let sf = &syn.sf;
    let mut rng = layercon::seeded_rng(23);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut xbar = normal(&mut rng, 4, 2.0);
        let mut x = &sf.lift.p * &xbar;
        for _ in 0..200 {
            let ubar = sample_in(&ps.up, &mut rng);
            let d = (syn.higher_l.output(&xbar).unwrap() - syn.lower_l.output(&x).unwrap()).norm();
            worst = worst.max(d - ps.tracking_epsilon);
            let u = sf.eval_controller(&ubar, &xbar, &x).unwrap();
            x = syn.lower_l.step(&x, &u).unwrap();
            xbar = syn.higher_l.step(&xbar, &ubar).unwrap();
        }
    }
    assert!(worst <= 1e-9, "distance exceeded precision by {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_bound_any_rate(t_l in prop::sample::select(vec![0.1, 0.25, 0.5, 1.0]), seed in 0u64..1000) {
        let syn = maze(SynthesisMethod::Lyapunov, t_l);
        let mut rng = layercon::seeded_rng(seed);
        for _ in 0..50 {
            let xbar = normal(&mut rng, 4, 2.0);
            let x = normal(&mut rng, 6, 2.0);
            prop_assert!(output_bound_holds(&syn, &xbar, &x));
        }
    }

    #[test]
    fn decrease_any_rate(t_l in prop::sample::select(vec![0.1, 0.25, 0.5, 1.0]), seed in 0u64..1000) {
        let syn = maze(SynthesisMethod::Lyapunov, t_l);
        let sf = &syn.sf;
        let mut rng = layercon::seeded_rng(seed);
        for _ in 0..50 {
            let xbar = normal(&mut rng, 4, 2.0);
            let x = normal(&mut rng, 6, 2.0);
            let v = sf.eval_v(&xbar, &x).unwrap();
            let ubar = normal(&mut rng, 2, 1.0).normalize() * (0.99 * v.sqrt() / sf.gamma);
            let vn = next_v(sf, &syn.lower_l, &syn.higher_l, &xbar, &x, &ubar);
            prop_assert!(vn < v);
        }
    }
}
