//! Two-tier UAV/ground-station downlink simulator with a multi-agent PPO
//! trainer whose reward components are normalized independently.

pub mod baseline;
pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geom;
pub mod learner;
pub mod metrics;
pub mod reward;
pub mod rng;
pub mod scenario;

pub use config::{Phase, ScenarioConfig};
pub use error::{Error, Result};
pub use geom::{Vec2, Vec3};
