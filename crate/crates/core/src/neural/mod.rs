//! Minimal dense-network machinery for the actor-critic agents.

pub mod adam;
pub mod head;
pub mod mlp;
pub mod replay;

pub use adam::Adam;
pub use head::{deterministic_action, squashed_backward, squashed_sample, SquashedSample};
pub use mlp::{Mlp, MlpCache};
pub use replay::{Batch, ReplayBuffer};
