mod common;

use layercon::constraints::{check_propagation_conditions, membership, tighten_output, HPolytope, PlanningOptions};
use layercon::simfunc::SynthesisMethod;
use nalgebra::DVector;
use proptest::prelude::*;

#[test]
fn conditions_hold_on_maze() {
    let design = common::maze_design(SynthesisMethod::Sdp);
    let syn = design.synthesize(0.5).unwrap();
    let ps = design.propagate(&syn).unwrap();
    let mut rng = layercon::seeded_rng(31);
    let rep = check_propagation_conditions(&syn.sf, syn.higher_l.c(), &ps, &design.y_pieces, &design.u, 10_000, &mut rng).unwrap();
    assert!(rep.passed(), "worst margin {}", rep.worst_margin());
    assert_eq!(rep.pieces.len(), 4);
}

#[test]
fn loosened_row_is_caught() {
    let design = common::maze_design(SynthesisMethod::Sdp);
    let syn = design.synthesize(0.5).unwrap();
    let mut ps = design.propagate(&syn).unwrap();
    // widen the corridor piece past its tightening
    let xp = &ps.xp[1];
    let h = xp.h().add_scalar(0.05);
    ps.xp[1] = HPolytope::new(xp.f().clone(), h).unwrap();
    let mut rng = layercon::seeded_rng(32);
    let rep = check_propagation_conditions(&syn.sf, syn.higher_l.c(), &ps, &design.y_pieces, &design.u, 2_000, &mut rng).unwrap();
    assert!(!rep.passed());
    assert!(rep.pieces[1].output.margin < -1e-3);
    assert!(rep.pieces[0].output.passed());
}

#[test]
fn pinned_epsilon_empties_narrow_corridor() {
    let mut design = common::maze_design(SynthesisMethod::Sdp);
    design.planning = PlanningOptions {
        epsilon: Some(0.4),
        ..PlanningOptions::default()
    };
    let syn = design.synthesize(0.5).unwrap();
    match design.propagate(&syn) {
        Err(layercon::Error::EmptyPlanningSet { .. }) => {}
        other => panic!("expected an empty piece, got {other:?}"),
    }
}

#[test]
fn membership_matches_rasterisation() {
    let region = common::maze_region();
    let boxes = [
        ([1.8, 7.125], [5.0, 7.875]),
        ([4.25, 4.5], [5.0, 7.875]),
        ([2.0, 4.5], [5.0, 5.25]),
        ([2.0, 4.5], [4.0, 6.5]),
    ];
    let mut mismatches = 0;
    for i in 150..=520 {
        for j in 420..=800 {
            let (x, y) = (i as f64 / 100.0, j as f64 / 100.0);
            let brute = boxes.iter().any(|(lo, hi)| lo[0] <= x && x <= hi[0] && lo[1] <= y && y <= hi[1]);
            let (inside, _) = membership(&region, &DVector::from_vec(vec![x, y])).unwrap();
            if inside != brute {
                mismatches += 1;
            }
        }
    }
    assert_eq!(mismatches, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tightening_is_monotone(e1 in 0.0f64..0.3, de in 0.0f64..0.3, x in 1.5f64..5.5, y in 4.0f64..8.0, v in -1.0f64..1.0) {
        let pieces = common::maze_pieces();
        let cbar = common::planar_chain(2).c().clone();
        let xbar = DVector::from_vec(vec![x, y, v, -v]);
        for p in &pieces {
            let small = tighten_output(p, &cbar, &layercon::constraints::xbar_from_output(p, &cbar).unwrap(), e1).unwrap();
            let large = tighten_output(p, &cbar, &layercon::constraints::xbar_from_output(p, &cbar).unwrap(), e1 + de).unwrap();
            if large.contains(&xbar, 0.0).unwrap() {
                prop_assert!(small.contains(&xbar, 1e-12).unwrap());
            }
        }
    }
}
