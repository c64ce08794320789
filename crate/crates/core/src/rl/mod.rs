//! Networks, optimiser, prioritised replay and the DDPG agent.

pub mod adam;
pub mod ddpg;
pub mod nn;
pub mod per;

pub use ddpg::{Checkpoint, DdpgAgent, DdpgConfig, UpdateStats, OBS_DIM};
pub use nn::{Activation, ForwardCache, Mlp};
pub use per::{PerBuffer, PerSample, SumTree, Transition};
