//! Training loops: fixed-track PPO and alternating spline/acceleration
//! optimisation.

use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::rng::{derive_seed, domain, stream_rng};

use super::adam::Adam;
use super::ppo::{ppo_update, single_step_update, UpdateStats};
use super::rollout::{collect_rollouts, compute_advantages, summarize, Env, RolloutSettings, RolloutStats};

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_return: f64,
    pub collision_rate: f64,
    pub goal_rate: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

impl IterationStats {
    pub const CSV_HEADER: &'static str = "iteration,mean_return,collision_rate,goal_rate,clip_fraction,entropy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.mean_return, self.collision_rate, self.goal_rate, self.clip_fraction, self.entropy
        )
    }

    fn from(iteration: usize, r: &RolloutStats, u: &UpdateStats) -> Self {
        IterationStats {
            iteration,
            mean_return: r.mean_return,
            collision_rate: r.collision_rate,
            goal_rate: r.goal_rate,
            clip_fraction: u.clip_fraction,
            entropy: u.entropy,
        }
    }
}

/// Owns the parameters and optimiser state across iterations.
pub struct Trainer {
    pub env: Env,
    pub params: PolicyParams,
    control_opt: Adam,
    spline_opt: Adam,
    /// Iterations completed so far.
    pub iteration: usize,
    rounds: u64,
}

impl Trainer {
    pub fn new(env: Env) -> Self {
        let params = env.init_params();
        Trainer::with_params(env, params)
    }

    pub fn with_params(env: Env, params: PolicyParams) -> Self {
        let lr = env.cfg.train.lr;
        Trainer {
            env,
            params,
            control_opt: Adam::new(lr),
            spline_opt: Adam::new(lr),
            iteration: 0,
            rounds: 0,
        }
    }

    fn round_seeds(&mut self) -> Vec<(u64, u64)> {
        let n = self.env.cfg.train.episodes_per_round as u64;
        let base = self.rounds * n;
        self.rounds += 1;
        (base..base + n)
            .map(|e| (e, derive_seed(self.env.cfg.seed, domain::ROLLOUT, e)))
            .collect()
    }

    fn update_rng(&self, phase: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(self.env.cfg.seed, domain::UPDATE, (self.iteration as u64) << 1 | phase)
    }

    /// Collects one round with sampled acceleration and applies one
    /// multi-step PPO update.
    fn control_step(&mut self, rounds: usize) -> Result<(RolloutStats, UpdateStats)> {
        let hp = self.env.cfg.train.clone();
        let mut outcomes = Vec::new();
        for _ in 0..rounds {
            let seeds = self.round_seeds();
            outcomes.extend(collect_rollouts(&self.env, &self.params, &RolloutSettings::accel_training(), &seeds)?);
        }
        for o in outcomes.iter_mut() {
            compute_advantages(o, hp.gamma, hp.lambda);
        }
        let ticks: Vec<_> = outcomes.iter_mut().flat_map(|o| std::mem::take(&mut o.ticks)).collect();
        let mut rng = self.update_rng(0);
        let st = ppo_update(&mut self.params, &mut self.control_opt, &ticks, &hp, &mut rng)?;
        Ok((summarize(&outcomes), st))
    }

    fn spline_step(&mut self, rounds: usize) -> Result<UpdateStats> {
        let hp = self.env.cfg.train.clone();
        let mut decisions = Vec::new();
        for _ in 0..rounds {
            let seeds = self.round_seeds();
            let outs = collect_rollouts(&self.env, &self.params, &RolloutSettings::spline_training(), &seeds)?;
            decisions.extend(outs.into_iter().flat_map(|o| o.decisions));
        }
        let mut rng = self.update_rng(1);
        single_step_update(&mut self.params, &mut self.spline_opt, &decisions, &hp, &mut rng)
    }

    /// One outer iteration: a PPO update for fixed tracks; for splines, K1
    /// spline rounds and an update, then K2 acceleration rounds and an update.
    pub fn iterate(&mut self) -> Result<IterationStats> {
        let hp = self.env.cfg.train.clone();
        let (rollout, update) = match self.env.cfg.model {
            ModelKind::FixedTrack => self.control_step(1)?,
            ModelKind::Spline => {
                if hp.k1 > 0 {
                    self.spline_step(hp.k1)?;
                }
                if hp.k2 == 0 {
                    return Err(Error::config("train.k2", "bilevel training needs at least one acceleration round"));
                }
                self.control_step(hp.k2)?
            }
        };
        self.iteration += 1;
        Ok(IterationStats::from(self.iteration, &rollout, &update))
    }

    /// Runs `iterations` iterations, calling `on_iteration` after each; the
    /// callback may stop training early by returning `false`.
    pub fn train<F>(&mut self, iterations: usize, mut on_iteration: F) -> Result<Vec<IterationStats>>
    where
        F: FnMut(&Trainer, &IterationStats) -> Result<bool>,
    {
        let mut curve = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let st = self.iterate()?;
            curve.push(st);
            if !on_iteration(self, &st)? {
                break;
            }
        }
        Ok(curve)
    }
}

/// Deterministic evaluation over fixed seeds.
pub fn evaluate(env: &Env, params: &PolicyParams, episodes: usize, eval_seed: u64, deterministic: bool) -> Result<RolloutStats> {
    let seeds = super::rollout::evaluation_seeds(eval_seed, episodes);
    let outs = collect_rollouts(env, params, &RolloutSettings::evaluation(deterministic, false), &seeds)?;
    Ok(summarize(&outs))
}
