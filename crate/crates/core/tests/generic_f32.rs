use layercon::constraints::{xbar_from_output, HPolytope, PlanningOptions};
use layercon::sim::Design;
use layercon::simfunc::AssembleOptions;
use layercon::systems::CtSystem;

fn toy<T: layercon::Real>() -> Design<T> {
    let lower = CtSystem::<T>::integrator_chain(3).unwrap();
    let higher = CtSystem::<T>::integrator_chain(2).unwrap();
    let y = HPolytope::from_box(&[T::lit(-5.0)], &[T::lit(5.0)]).unwrap();
    Design {
        xbar: vec![xbar_from_output(&y, higher.c()).unwrap()],
        lower,
        higher,
        t_h: T::one(),
        t_total: T::lit(10.0),
        y_pieces: vec![y],
        u: HPolytope::from_box(&[T::lit(-2.0)], &[T::lit(2.0)]).unwrap(),
        ubar: HPolytope::from_box(&[T::lit(-1.0)], &[T::lit(1.0)]).unwrap(),
        assemble: AssembleOptions::default(),
        planning: PlanningOptions::default(),
    }
}

#[test]
fn single_precision_pipeline_agrees_with_double() {
    let d32 = toy::<f32>();
    let d64 = toy::<f64>();
    let s32 = d32.synthesize(0.5).unwrap();
    let s64 = d64.synthesize(0.5).unwrap();
    let p32 = d32.propagate(&s32).unwrap();
    let p64 = d64.propagate(&s64).unwrap();
    let rel = |a: f32, b: f64| ((a as f64) - b).abs() / b.abs().max(1e-12);
    assert!(rel(s32.sf.gamma, s64.sf.gamma) < 1e-2, "{} vs {}", s32.sf.gamma, s64.sf.gamma);
    assert!(rel(p32.epsilon, p64.epsilon) < 1e-2, "{} vs {}", p32.epsilon, p64.epsilon);
    assert!(p32.epsilon.is_finite());
}
