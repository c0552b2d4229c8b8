//! Rollout collection, advantage estimation and PPO updates.

pub mod adam;
pub mod gae;
pub mod ppo;
pub mod rollout;
pub mod train;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use gae::gae;
pub use ppo::{ppo_update, single_step_update, UpdateStats};
pub use rollout::{collect_rollouts, run_episode, Env, EpisodeOutcome, RolloutSettings, RolloutStats, Select};
pub use train::{evaluate, IterationStats, Trainer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Outer iterations (fixed-track PPO iterations or bilevel rounds).
    pub iterations: usize,
    /// Spline collection rounds per bilevel iteration.
    pub k1: usize,
    /// Acceleration collection rounds per bilevel iteration.
    pub k2: usize,
    /// Episodes collected per round.
    pub episodes_per_round: usize,
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub checkpoint_every: usize,
    pub workers: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 3e-4,
            epochs: 4,
            minibatch_size: 256,
            iterations: 50,
            k1: 8,
            k2: 8,
            episodes_per_round: 8,
            max_grad_norm: 0.5,
            hidden: 64,
            checkpoint_every: 10,
            workers: 1,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::config(format!("train.{f}"), m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", "must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip", "must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return bad("value_coef", "coefficients must be non-negative");
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return bad("epochs", "epochs and minibatch_size must be at least 1");
        }
        if self.episodes_per_round == 0 {
            return bad("episodes_per_round", "must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be at least 1");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every", "must be at least 1");
        }
        Ok(())
    }
}
