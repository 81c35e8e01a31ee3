//! Minimum-dependency joint policies for cooperative multi-agent reach-avoid
//! games.

pub mod comm;
pub mod conic;
pub mod error;
pub mod executor;
pub mod experiment;
pub mod fixtures;
pub mod gridworld;
pub mod infometrics;
pub mod markov_game;
pub mod occupancy;
pub mod policy;
pub mod synthesis;

pub use error::{Error, Result};
pub use markov_game::{AgentMdp, JointGame, MixedRadix};
pub use policy::JointPolicy;
