//! Shared-parameter actor, centralized critic and the PPO machinery that
//! trains them.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod gae;
pub mod mlp;
pub mod ppo;
pub mod trainer;

pub use adam::AdamState;
pub use buffer::RolloutBuffer;
pub use checkpoint::Checkpoint;
pub use gae::gae;
pub use mlp::Mlp;
pub use ppo::{ppo_update, Sample};
pub use trainer::{EpisodeReport, TraceRow, Trainer};
