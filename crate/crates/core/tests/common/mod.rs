#![allow(dead_code)]

use layercon::constraints::{xbar_from_output, HPolytope, PlanningOptions, SafeRegion};
use layercon::planner::{Mission, PlannerConfig};
use layercon::sim::Design;
use layercon::simfunc::{AssembleOptions, SynthesisMethod};
use layercon::systems::CtSystem;
use nalgebra::{DMatrix, DVector};

/// Planar `order`-integrator with state `(p, v, …)` interleaved per axis as
/// `(px, py, vx, vy, …)`.
pub fn planar_chain(order: usize) -> CtSystem<f64> {
    let n = 2 * order;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 2 {
        a[(i, i + 2)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, 2);
    b[(n - 2, 0)] = 1.0;
    b[(n - 1, 1)] = 1.0;
    let mut c = DMatrix::zeros(2, n);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    CtSystem::new(a, b, c).unwrap()
}

pub fn boxp(lo: &[f64], hi: &[f64]) -> HPolytope<f64> {
    HPolytope::from_box(lo, hi).unwrap()
}

/// The four corridor rectangles of the bundled maze.
pub fn maze_pieces() -> Vec<HPolytope<f64>> {
    vec![
        boxp(&[1.8, 7.125], &[5.0, 7.875]),
        boxp(&[4.25, 4.5], &[5.0, 7.875]),
        boxp(&[2.0, 4.5], &[5.0, 5.25]),
        boxp(&[2.0, 4.5], &[4.0, 6.5]),
    ]
}

pub fn maze_region() -> SafeRegion<f64> {
    SafeRegion::new(maze_pieces()).unwrap()
}

pub fn maze_design(method: SynthesisMethod) -> Design<f64> {
    let higher = planar_chain(2);
    let y_pieces = maze_pieces();
    let xbar = y_pieces.iter().map(|y| xbar_from_output(y, higher.c()).unwrap()).collect();
    Design {
        lower: planar_chain(3),
        higher,
        t_h: 1.0,
        t_total: 150.0,
        y_pieces,
        u: boxp(&[-2.0, -2.0], &[2.0, 2.0]),
        ubar: boxp(&[-1.0, -1.0], &[1.0, 1.0]),
        xbar,
        assemble: AssembleOptions {
            method,
            ..AssembleOptions::default()
        },
        planning: PlanningOptions::default(),
    }
}

pub fn maze_mission() -> Mission<f64> {
    let wp = |x: f64, y: f64| DVector::from_vec(vec![x, y]);
    Mission::new(
        vec![wp(4.625, 7.5), wp(4.625, 4.875), wp(3.5, 4.875)],
        vec![0, 1, 2],
        wp(3.5, 5.7),
        0.25,
        3,
        0.3,
    )
    .unwrap()
}

pub fn maze_planner() -> PlannerConfig<f64> {
    PlannerConfig::with_dims(2, 2)
}

/// `(x̄₀, x₀ = P x̄₀)` at the maze start.
pub fn maze_start() -> DVector<f64> {
    DVector::from_vec(vec![2.2, 7.5, 0.0, 0.0])
}
