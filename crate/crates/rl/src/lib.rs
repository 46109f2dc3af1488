//! Learning side of the stack: observations, a small MLP library with
//! manual gradients, the squashed-Gaussian policy, soft actor-critic,
//! replay, checkpoints and the trainer loop.

pub mod checkpoint;
pub mod codec;
pub mod mlp;
pub mod observation;
pub mod policy;
pub mod replay;
pub mod reward;
pub mod sac;
pub mod shared;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use mlp::{Activation, Mlp};
pub use observation::{build_observation, Observation, ObservationScaling, ACTION_DIM, OBS_DIM};
pub use policy::{policy_forward, scale_action, Action, PolicyMode};
pub use replay::{Experience, ReplayBuffer};
pub use reward::compute_reward;
pub use sac::{sac_update, Losses, SacState};
pub use shared::{PolicySnapshot, PolicyStore};
pub use trainer::Trainer;
