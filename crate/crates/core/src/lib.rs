//! Bandit-driven data-mixture scheduling for instruction tuning.
//!
//! Each dataset in a collection is an arm. The sampling distribution is a
//! prior-scaled Boltzmann law over smoothed look-ahead rewards, mixed with a
//! uniform floor so that no arm is ever starved:
//!
//! ```text
//! p_k = (1 - gamma) * exp(beta * Q_k) * prior_k / sum_j exp(beta * Q_j) * prior_j + gamma / K
//! ```
//!
//! Rewards come from a one-step look-ahead: the learner takes a temporary
//! gradient step on a batch from each arm, the relative loss decrease is
//! recorded, and the step is rolled back. `Q` is an exponential moving
//! average of those rewards.
//!
//! The crate is organised as:
//!
//! * [`mixture`]: the probability law and categorical sampling.
//! * [`reward`]: the [`Learner`] contract, look-ahead rewards and EMA.
//! * [`policy`]: dynamic and static mixture policies behind one type.
//! * [`sim`]: a deterministic synthetic learner and the TÜLU-v2 registry.
//! * [`trace`]: line-delimited trace persistence, summaries, CSV export.
//! * [`experiment`]: config schema and the run / compare / sweep drivers.

pub mod error;
pub mod experiment;
pub mod mixture;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use experiment::{
    compare, run, run_to_dir, run_with_sink, sweep, ComparisonRow, Experiment, ExperimentConfig,
    GridPoint, GridSpec, RunOutcome, Scheduler, SweepOutcome,
};
pub use mixture::{
    boltzmann_probs, mixture_probs, prior_scaled_probs, sample_arm, sample_batch, ArmRegistry,
    BanditConfig, Draw, MixtureDistribution, QState,
};
pub use policy::{PolicyKind, PolicyState, PolicyVariant};
pub use reward::{
    delta_entropy_reward, delta_loss_reward, ema_update, lookahead_round, Learner, RewardKind,
    RewardReport,
};
pub use sim::{make_tulu_registry, make_tulu_registry_merged, LrSchedule, SimParams, SimWorld};
pub use trace::{PlotKind, RunSummary, TraceHeader, TraceRecord};
