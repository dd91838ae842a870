//! Layered control of constrained linear systems: a planner drives an
//! abstract higher-layer model at a slow rate while a tracking controller
//! keeps the concrete lower layer close to it at a fast rate. The crate
//! synthesises the tracking certificate, tightens the planning constraints
//! so the lower layer stays safe, and simulates and monitors the loop.
//!
//! Everything is generic over the scalar (`f32` or `f64`); the aliases
//! below fix it to the common choices.

pub mod constraints;
pub mod error;
pub mod numerics;
pub mod planner;
pub mod scalar;
pub mod sim;
pub mod simfunc;
pub mod systems;

pub use error::{Error, PlanningSetKind, Result};
pub use scalar::Real;

/// Deterministic generator for the randomised checks.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub type CtSystemF64 = systems::CtSystem<f64>;
pub type DtSystemF64 = systems::DtSystem<f64>;
pub type SimFunctionF64 = simfunc::SimFunction<f64>;
pub type HPolytopeF64 = constraints::HPolytope<f64>;
pub type PlanningSetsF64 = constraints::PlanningSets<f64>;
pub type TraceLogF64 = sim::TraceLog<f64>;
pub type DesignF64 = sim::Design<f64>;

pub type CtSystemF32 = systems::CtSystem<f32>;
pub type DtSystemF32 = systems::DtSystem<f32>;
pub type SimFunctionF32 = simfunc::SimFunction<f32>;
pub type HPolytopeF32 = constraints::HPolytope<f32>;
