//! Drive cycles, a hybrid powertrain simulator, a DDPG agent and the
//! experiment harness that ties them together.

pub mod bundled;
pub mod cycle;
pub mod env;
pub mod error;
pub mod harness;
pub mod par;
pub mod rl;
pub mod sim;
pub mod vehicle;

pub use error::{Error, Result};
