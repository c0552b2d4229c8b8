//! Multi-agent 2D driving environments trained with PPO, plus metrics for the
//! traffic conventions that emerge.

pub mod config;
pub mod error;
pub mod geometry;
pub mod log;
pub mod map;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod reward;
pub mod sensing;
pub mod world;

pub use config::{ModelKind, RouteMode, ScenarioConfig};
pub use error::{Error, Result};
pub use geometry::{Pose, Segment, Spline, Vec2};
pub use map::MapSpec;
pub use optim::HyperParams;
pub use world::{AgentAction, Phase, Status, World};
