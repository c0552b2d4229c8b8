//! Clipped-surrogate updates: the multi-step objective with the centralized
//! critic, and the single-step objective on normalized returns.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::spline::{BINS, STATIONS};
use crate::policy::{MultiCategorical, ParamGroup, PolicyParams};

use super::adam::{clip_global_norm, Adam};
use super::rollout::{JointTick, SplineDecision};
use super::HyperParams;

/// Floor on the standard deviation used for z-scoring.
pub const STD_FLOOR: f64 = 1e-8;

pub fn clipped_surrogate(ratio: f64, adv: f64, clip: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv)
}

/// Derivative of the clipped surrogate with respect to the log-probability.
fn surrogate_grad(ratio: f64, adv: f64, clip: f64) -> f64 {
    if ratio * adv <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv {
        ratio * adv
    } else {
        0.0
    }
}

pub fn z_score(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(STD_FLOOR);
    xs.iter().map(|x| (x - mean) / sd).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub samples: usize,
}

impl UpdateStats {
    fn accumulate(&mut self, o: &UpdateStats) {
        let w = o.samples as f64;
        self.policy_loss += o.policy_loss * w;
        self.value_loss += o.value_loss * w;
        self.entropy += o.entropy * w;
        self.clip_fraction += o.clip_fraction * w;
        self.approx_kl += o.approx_kl * w;
        self.grad_norm += o.grad_norm * w;
        self.samples += o.samples;
    }

    fn finish(mut self) -> Self {
        let n = self.samples.max(1) as f64;
        self.policy_loss /= n;
        self.value_loss /= n;
        self.entropy /= n;
        self.clip_fraction /= n;
        self.approx_kl /= n;
        self.grad_norm /= n;
        self
    }

    fn check_finite(&self) -> Result<()> {
        if self.policy_loss.is_finite() && self.value_loss.is_finite() && self.entropy.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("loss diverged: {self:?}")))
        }
    }
}

/// Per-sample terms of the clipped objective, shared by both updates.
struct SampleTerms {
    d_log_prob: f64,
    loss: f64,
    entropy: f64,
    clipped: bool,
    kl: f64,
}

fn sample_terms(dist: &MultiCategorical, actions: &[usize], old_log_prob: f64, adv: f64, clip: f64) -> SampleTerms {
    let lp = dist.log_prob(actions);
    let ratio = (lp - old_log_prob).exp();
    SampleTerms {
        d_log_prob: surrogate_grad(ratio, adv, clip),
        loss: -clipped_surrogate(ratio, adv, clip),
        entropy: dist.entropy(),
        clipped: (ratio - 1.0).abs() > clip,
        kl: old_log_prob - lp,
    }
}

/// Loss gradient of one minibatch of joint ticks. `adv[i][k]` is the
/// (normalized) advantage of step `k` of tick `i`.
pub fn control_gradient(params: &PolicyParams, ticks: &[&JointTick], adv: &[&[f64]], hp: &HyperParams) -> Result<(PolicyParams, UpdateStats)> {
    let n = ticks.iter().map(|t| t.steps.len()).sum::<usize>() as f64;
    let mut grads = params.zeros_like();
    let mut st = UpdateStats::default();
    for (tick, adv) in ticks.iter().zip(adv) {
        if tick.steps.is_empty() {
            continue;
        }
        let refs: Vec<&[f64]> = tick.steps.iter().map(|s| s.features.as_slice()).collect();
        let (values, cache) = params.critic_group(&refs)?;
        let d_values: Vec<f64> = values
            .iter()
            .zip(&tick.steps)
            .map(|(v, s)| {
                st.value_loss += (v - s.ret).powi(2);
                2.0 * hp.value_coef * (v - s.ret) / n
            })
            .collect();
        params.critic_group_backward(&cache, &d_values, &mut grads);
        for (s, &a) in tick.steps.iter().zip(adv.iter()) {
            let fc = params.accel.forward_cached(&s.features);
            let dist = MultiCategorical::new(fc.output(), &params.accel_heads);
            let t = sample_terms(&dist, &s.actions, s.log_prob, a, hp.clip);
            let d_logits = dist.logit_grad(&s.actions, -t.d_log_prob / n, -hp.entropy_coef / n);
            params.accel.backward(&fc, &d_logits, &mut grads.accel);
            st.policy_loss += t.loss;
            st.entropy += t.entropy;
            st.clip_fraction += t.clipped as u8 as f64;
            st.approx_kl += t.kl;
        }
    }
    st.samples = n as usize;
    let k = n.max(1.0);
    st.policy_loss /= k;
    st.value_loss /= k;
    st.entropy /= k;
    st.clip_fraction /= k;
    st.approx_kl /= k;
    Ok((grads, st))
}

fn apply(params: &mut PolicyParams, grads: &mut PolicyParams, group: ParamGroup, opt: &mut Adam, max_norm: f64) -> f64 {
    let norm = clip_global_norm(grads.group_mut(group), max_norm);
    opt.step(params.group_mut(group), &grads.group(group));
    params.version += 1;
    norm
}

/// Shuffled minibatches of whole joint ticks, each closed once it holds at
/// least `size` agent steps.
fn tick_minibatches<R: Rng>(ticks: &[JointTick], size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..ticks.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut count = 0;
    for i in order {
        count += ticks[i].steps.len();
        cur.push(i);
        if count >= size {
            out.push(std::mem::take(&mut cur));
            count = 0;
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Several epochs of minibatch descent on the clipped objective with value
/// and entropy terms. Advantages are z-scored over the whole batch.
pub fn ppo_update<R: Rng>(params: &mut PolicyParams, opt: &mut Adam, ticks: &[JointTick], hp: &HyperParams, rng: &mut R) -> Result<UpdateStats> {
    let flat: Vec<f64> = ticks.iter().flat_map(|t| t.steps.iter().map(|s| s.advantage)).collect();
    if flat.is_empty() {
        return Ok(UpdateStats::default());
    }
    let normed = z_score(&flat);
    let mut adv: Vec<&[f64]> = Vec::with_capacity(ticks.len());
    let mut off = 0;
    for t in ticks {
        adv.push(&normed[off..off + t.steps.len()]);
        off += t.steps.len();
    }
    let mut total = UpdateStats::default();
    for _ in 0..hp.epochs {
        for mb in tick_minibatches(ticks, hp.minibatch_size, rng) {
            let tk: Vec<&JointTick> = mb.iter().map(|&i| &ticks[i]).collect();
            let ad: Vec<&[f64]> = mb.iter().map(|&i| adv[i]).collect();
            let (mut grads, mut st) = control_gradient(params, &tk, &ad, hp)?;
            st.check_finite()?;
            st.grad_norm = apply(params, &mut grads, ParamGroup::Control, opt, hp.max_grad_norm);
            total.accumulate(&st);
        }
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("parameters diverged".into()));
    }
    Ok(total.finish())
}

/// Loss gradient of the single-step objective on a minibatch of decisions
/// whose normalized returns are `norm_ret`.
pub fn spline_gradient(params: &PolicyParams, decisions: &[&SplineDecision], norm_ret: &[f64], hp: &HyperParams) -> Result<(PolicyParams, UpdateStats)> {
    let n = decisions.len() as f64;
    let mut grads = params.zeros_like();
    let mut st = UpdateStats::default();
    for (d, &r) in decisions.iter().zip(norm_ret) {
        params.spline.check_input(&d.features)?;
        let fc = params.spline.forward_cached(&d.features);
        let dist = MultiCategorical::new(fc.output(), &[BINS; STATIONS]);
        let t = sample_terms(&dist, &d.bins, d.log_prob, r, hp.clip);
        let d_logits = dist.logit_grad(&d.bins, -t.d_log_prob / n, -hp.entropy_coef / n);
        params.spline.backward(&fc, &d_logits, &mut grads.spline);
        st.policy_loss += t.loss / n;
        st.entropy += t.entropy / n;
        st.clip_fraction += t.clipped as u8 as f64 / n;
        st.approx_kl += t.kl / n;
    }
    st.samples = decisions.len();
    Ok((grads, st))
}

/// Single-step update on batch-normalized episode returns; no critic.
pub fn single_step_update<R: Rng>(
    params: &mut PolicyParams,
    opt: &mut Adam,
    decisions: &[SplineDecision],
    hp: &HyperParams,
    rng: &mut R,
) -> Result<UpdateStats> {
    if decisions.len() < 2 {
        return Err(Error::config(
            "train.episodes_per_round",
            format!("single-step update needs at least 2 decisions to normalize returns, got {}", decisions.len()),
        ));
    }
    let returns: Vec<f64> = decisions.iter().map(|d| d.ret).collect();
    let normed = z_score(&returns);
    let mut total = UpdateStats::default();
    for _ in 0..hp.epochs {
        let mut order: Vec<usize> = (0..decisions.len()).collect();
        order.shuffle(rng);
        for mb in order.chunks(hp.minibatch_size) {
            let ds: Vec<&SplineDecision> = mb.iter().map(|&i| &decisions[i]).collect();
            let rs: Vec<f64> = mb.iter().map(|&i| normed[i]).collect();
            let (mut grads, mut st) = spline_gradient(params, &ds, &rs, hp)?;
            st.check_finite()?;
            st.grad_norm = apply(params, &mut grads, ParamGroup::Spline, opt, hp.max_grad_norm);
            total.accumulate(&st);
        }
    }
    if !params.all_finite() {
        return Err(Error::NonFinite("parameters diverged".into()));
    }
    Ok(total.finish())
}
