//! Synthetic learner with non-stationary per-arm loss dynamics.
//!
//! Each arm has an expected loss that decays toward an irreducible floor as
//! the learner trains on it (and, through a transfer matrix, on other arms).
//! Arms saturate at different times, so the look-ahead reward of each arm
//! drifts over a run the way it does during real fine-tuning.

mod schedule;
mod tulu;
mod world;

pub use schedule::LrSchedule;
pub use tulu::{
    make_tulu_registry, make_tulu_registry_merged, TULU_SCIENCE_BUNDLE, TULU_V2_COUNTS,
};
pub use world::{SimCheckpoint, SimParams, SimWorld, WorldState};
