//! Evaluation harness: scenarios, the compared safety stacks, episode
//! simulation, metrics, trial batches, local training, the search bench and
//! config validation.

pub mod bench;
pub mod collect;
pub mod driver;
pub mod methods;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod training;
pub mod trials;
pub mod validate;

use thiserror::Error;

pub use methods::{MethodId, MethodStack};
pub use scenario::{LoadedScenario, Scenario, SuccessPredicate};
pub use sim::{simulate, EpisodeResult, SimOptions, Termination};
pub use trials::{run_episode, run_trials, TrialRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("unknown method {0:?}")]
    Method(String),
    #[error("method {0} needs a policy checkpoint")]
    MissingCheckpoint(MethodId),
    #[error("metric: {0}")]
    Metric(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] safer_core::Error),
    #[error(transparent)]
    Shape(#[from] safer_rl::mlp::ShapeError),
    #[error(transparent)]
    Sac(#[from] safer_rl::sac::SacError),
    #[error(transparent)]
    Checkpoint(#[from] safer_rl::checkpoint::CheckpointError),
}
