//! UAV-mounted RIS secure downlink with energy-harvesting eavesdroppers:
//! channel synthesis, physical-layer metrics, an MDP environment, deep RL
//! agents and an SCA/BCD optimization benchmark.

pub mod agents;
pub mod channels;
pub mod convex;
pub mod env;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod neural;
pub mod phy;
pub mod rng;
pub mod sca;

pub use error::{Error, Result};
