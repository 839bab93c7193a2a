//! Active-inference exploration of grid-room worlds.
//!
//! The agent starts with a one-state model, grows imagined states around
//! every room it reaches, and picks actions by sampling from a softmax over
//! the expected free energy of all fixed-horizon policies. Perceptual
//! aliasing is resolved by pairing each state with a dead-reckoned pose.

pub mod agent;
pub mod harness;
pub mod inference;
pub mod learning;
pub mod model;
pub mod planner;
pub mod roomworld;

pub use agent::{Agent, AgentConfig};
pub use harness::{run_episode, RunConfig, RunResult};
pub use model::{Action, GenerativeModel, ObservationId, Pose, StateId};
pub use roomworld::{preset, Room, RoomWorldSpec};
