//! Shared actor networks and the centralized critic.
//!
//! Three networks make up a policy: the acceleration actor (plus an optional
//! message head), the single-step spline actor, and a critic that pools
//! per-agent latents by their mean.

pub mod checkpoint;
pub mod dist;
pub mod nn;
pub mod spline;

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::world::NUM_ACCELS;
pub use dist::{Categorical, MultiCategorical};
pub use nn::{Dense, Mlp, MlpCache};

/// Widths that determine every network shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyShape {
    pub accel_inputs: usize,
    pub spline_inputs: usize,
    pub hidden: usize,
    pub comm: bool,
}

impl PolicyShape {
    pub fn accel_heads(&self) -> Vec<usize> {
        if self.comm {
            vec![NUM_ACCELS, 2]
        } else {
            vec![NUM_ACCELS]
        }
    }
}

/// Which networks an optimiser step touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Acceleration actor and critic.
    Control,
    /// Spline actor.
    Spline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Number of optimiser updates applied so far.
    pub version: u64,
    pub accel_heads: Vec<usize>,
    pub accel: Mlp,
    pub spline: Mlp,
    pub critic_encoder: Mlp,
    pub critic_head: Mlp,
}

pub const NETWORK_NAMES: [&str; 4] = ["accel", "spline", "critic.encoder", "critic.head"];

impl PolicyParams {
    pub fn new<R: Rng>(shape: PolicyShape, rng: &mut R) -> Self {
        let h = shape.hidden;
        let heads = shape.accel_heads();
        let n_out: usize = heads.iter().sum();
        PolicyParams {
            version: 0,
            accel: Mlp::glorot(&[shape.accel_inputs, h, h, n_out], false, rng),
            spline: Mlp::glorot(&[shape.spline_inputs, h, h, spline::STATIONS * spline::BINS], false, rng),
            critic_encoder: Mlp::glorot(&[shape.accel_inputs, h, h], true, rng),
            critic_head: Mlp::glorot(&[2 * h, h, 1], false, rng),
            accel_heads: heads,
        }
    }

    pub fn zeros_like(&self) -> Self {
        PolicyParams {
            version: self.version,
            accel_heads: self.accel_heads.clone(),
            accel: self.accel.zeros_like(),
            spline: self.spline.zeros_like(),
            critic_encoder: self.critic_encoder.zeros_like(),
            critic_head: self.critic_head.zeros_like(),
        }
    }

    pub fn networks(&self) -> [(&'static str, &Mlp); 4] {
        [
            (NETWORK_NAMES[0], &self.accel),
            (NETWORK_NAMES[1], &self.spline),
            (NETWORK_NAMES[2], &self.critic_encoder),
            (NETWORK_NAMES[3], &self.critic_head),
        ]
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            accel_inputs: self.accel.in_dim(),
            spline_inputs: self.spline.in_dim(),
            hidden: self.accel.layers[0].out_dim,
            comm: self.accel_heads.len() > 1,
        }
    }

    pub fn group(&self, g: ParamGroup) -> Vec<&[f64]> {
        match g {
            ParamGroup::Control => [&self.accel, &self.critic_encoder, &self.critic_head]
                .into_iter()
                .flat_map(|m| m.slices())
                .collect(),
            ParamGroup::Spline => self.spline.slices(),
        }
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> Vec<&mut [f64]> {
        match g {
            ParamGroup::Control => {
                let mut v = self.accel.slices_mut();
                v.extend(self.critic_encoder.slices_mut());
                v.extend(self.critic_head.slices_mut());
                v
            }
            ParamGroup::Spline => self.spline.slices_mut(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.networks()
            .iter()
            .all(|(_, m)| m.slices().iter().all(|s| s.iter().all(|x| x.is_finite())))
    }

    pub fn forward_accel(&self, features: &[f64]) -> Result<MultiCategorical> {
        self.accel.check_input(features)?;
        Ok(MultiCategorical::new(&self.accel.forward(features), &self.accel_heads))
    }

    pub fn forward_spline(&self, features: &[f64]) -> Result<MultiCategorical> {
        self.spline.check_input(features)?;
        Ok(MultiCategorical::new(
            &self.spline.forward(features),
            &[spline::BINS; spline::STATIONS],
        ))
    }

    /// Value for the agent observing `ego`, given every active agent's
    /// observation (including the ego's own). Exactly invariant to the order
    /// of `all`.
    pub fn forward_critic(&self, ego: &[f64], all: &[&[f64]]) -> Result<f64> {
        if all.is_empty() {
            return Err(Error::Contract("critic needs at least one observation".into()));
        }
        self.critic_encoder.check_input(ego)?;
        for o in all {
            self.critic_encoder.check_input(o)?;
        }
        let latents: Vec<Vec<f64>> = all.iter().map(|o| self.critic_encoder.forward(o)).collect();
        let mean = sorted_mean(&latents);
        let mut input = self.critic_encoder.forward(ego);
        input.extend(mean);
        Ok(self.critic_head.forward(&input)[0])
    }

    /// Values for every agent in a joint tick, sharing one encoder pass each.
    pub fn critic_group(&self, obs: &[&[f64]]) -> Result<(Vec<f64>, CriticCache)> {
        if obs.is_empty() {
            return Err(Error::Contract("critic needs at least one observation".into()));
        }
        for o in obs {
            self.critic_encoder.check_input(o)?;
        }
        let enc: Vec<MlpCache> = obs.iter().map(|o| self.critic_encoder.forward_cached(o)).collect();
        let latents: Vec<Vec<f64>> = enc.iter().map(|c| c.output().to_vec()).collect();
        let mean = sorted_mean(&latents);
        let heads: Vec<MlpCache> = latents
            .iter()
            .map(|l| {
                let mut input = l.clone();
                input.extend_from_slice(&mean);
                self.critic_head.forward_cached(&input)
            })
            .collect();
        let values = heads.iter().map(|c| c.output()[0]).collect();
        Ok((values, CriticCache { enc, heads }))
    }

    /// Backpropagates `d_values` (one per agent of the group) into `grads`.
    pub fn critic_group_backward(&self, cache: &CriticCache, d_values: &[f64], grads: &mut PolicyParams) {
        let m = cache.enc.len();
        let h = self.critic_encoder.out_dim();
        let mut d_mean = vec![0.0; h];
        let mut d_latent = vec![vec![0.0; h]; m];
        for (i, (hc, &dv)) in cache.heads.iter().zip(d_values).enumerate() {
            if dv == 0.0 {
                continue;
            }
            let d_in = self.critic_head.backward(hc, &[dv], &mut grads.critic_head);
            for k in 0..h {
                d_latent[i][k] += d_in[k];
                d_mean[k] += d_in[h + k];
            }
        }
        for (ec, dl) in cache.enc.iter().zip(d_latent.iter_mut()) {
            for (d, dm) in dl.iter_mut().zip(&d_mean) {
                *d += dm / m as f64;
            }
            if dl.iter().any(|&x| x != 0.0) {
                self.critic_encoder.backward(ec, dl, &mut grads.critic_encoder);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    enc: Vec<MlpCache>,
    heads: Vec<MlpCache>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean of equal-length vectors, accumulated in sorted order so the result
/// is bitwise independent of the input order.
pub fn sorted_mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut order: Vec<&Vec<f64>> = vs.iter().collect();
    order.sort_by(|a, b| lexicographic(a, b));
    let mut sum = vec![0.0; vs[0].len()];
    for v in order {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let m = vs.len() as f64;
    sum.iter_mut().for_each(|s| *s /= m);
    sum
}
