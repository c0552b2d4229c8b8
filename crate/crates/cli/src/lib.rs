//! Command implementations behind the `roadlab` binary.

pub mod config;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod render;
pub mod rollout;
pub mod train;

pub use config::{output_dir, resolve_config};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use metrics::{cmd_metrics, MetricName, MetricRow, MetricsOptions};
pub use render::cmd_render;
pub use rollout::{cmd_rollout, RolloutOptions, RolloutReport};
pub use train::{cmd_train, TrainReport};
