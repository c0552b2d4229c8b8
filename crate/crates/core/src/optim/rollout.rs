//! Episode simulation with a shared policy: action selection, reward
//! bookkeeping, training records and optional trajectory logs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{ModelKind, ScenarioConfig};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::log::{AgentSample, AgentSummary, AgentTrack, EpisodeLog, LogHeader, PedestrianSample, SignalSample, LOG_SCHEMA, LOG_VERSION};
use crate::map::MapSpec;
use crate::policy::spline::decode_spline;
use crate::policy::{MultiCategorical, PolicyParams, PolicyShape};
use crate::reward::{compute_reward, episode_return, RewardBreakdown, RewardEvents};
use crate::rng::{domain, stream_rng};
use crate::sensing::{accel_feature_dim, spline_feature_dim, LidarHistory, Scene, Sensor};
use crate::world::{accel_value, AgentAction, Status, World};

use super::gae::gae;

/// A scenario with its resolved map, ready to run episodes.
#[derive(Debug, Clone)]
pub struct Env {
    pub cfg: ScenarioConfig,
    pub map: Arc<MapSpec>,
    pub sensor: Sensor,
}

impl Env {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let map = Arc::new(cfg.load_map()?);
        Ok(Env {
            cfg: cfg.clone(),
            map,
            sensor: Sensor::from_config(cfg),
        })
    }

    pub fn policy_shape(&self) -> PolicyShape {
        PolicyShape {
            accel_inputs: accel_feature_dim(self.sensor.n_rays, self.sensor.stack),
            spline_inputs: spline_feature_dim(self.sensor.n_rays),
            hidden: self.cfg.train.hidden,
            comm: self.cfg.comm_enabled,
        }
    }

    /// Freshly initialised parameters drawn from the scenario's root seed.
    pub fn init_params(&self) -> PolicyParams {
        PolicyParams::new(self.policy_shape(), &mut stream_rng(self.cfg.seed, domain::INIT, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Select {
    Sample,
    Argmax,
}

impl Select {
    fn pick(self, d: &MultiCategorical, rng: &mut impl rand::Rng) -> Vec<usize> {
        match self {
            Select::Sample => d.sample(rng),
            Select::Argmax => d.argmax(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutSettings {
    pub accel: Select,
    pub spline: Select,
    /// Keep per-tick transitions and critic values for an acceleration update.
    pub collect_ticks: bool,
    pub record_log: bool,
    /// Store full observation vectors in the log rather than digests only.
    pub log_observations: bool,
}

impl RolloutSettings {
    /// Sampled acceleration with training records (fixed-track PPO, or the
    /// acceleration phase of bilevel training).
    pub fn accel_training() -> Self {
        RolloutSettings {
            accel: Select::Sample,
            spline: Select::Argmax,
            collect_ticks: true,
            record_log: false,
            log_observations: false,
        }
    }

    /// Sampled splines, acceleration frozen at its argmax.
    pub fn spline_training() -> Self {
        RolloutSettings {
            accel: Select::Argmax,
            spline: Select::Sample,
            collect_ticks: false,
            record_log: false,
            log_observations: false,
        }
    }

    pub fn evaluation(deterministic: bool, record_log: bool) -> Self {
        let s = if deterministic { Select::Argmax } else { Select::Sample };
        RolloutSettings {
            accel: s,
            spline: s,
            collect_ticks: false,
            record_log,
            log_observations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub agent: usize,
    pub features: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_prob: f64,
    /// Critic value recorded at collection time.
    pub value: f64,
    pub reward: f64,
    /// The agent halted (goal or collision) on this transition.
    pub done: bool,
    pub advantage: f64,
    pub ret: f64,
}

/// Every agent that acted on one tick; the critic pools over this group.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTick {
    pub steps: Vec<AgentStep>,
}

/// One spline choice and the undiscounted return of the episode it shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineDecision {
    pub agent: usize,
    pub features: Vec<f64>,
    pub bins: Vec<usize>,
    pub log_prob: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutcome {
    pub agent: usize,
    pub ret: RewardBreakdown,
    pub status: Status,
    pub rating: f64,
    /// Critic value of the state after the last transition; zero when the
    /// agent halted.
    pub bootstrap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub episode: u64,
    pub seed: u64,
    pub ticks: Vec<JointTick>,
    pub decisions: Vec<SplineDecision>,
    pub agents: Vec<AgentOutcome>,
    pub log: Option<EpisodeLog>,
}

struct Runner<'a> {
    env: &'a Env,
    params: &'a PolicyParams,
    settings: &'a RolloutSettings,
    world: World,
    histories: Vec<LidarHistory>,
    rewards: Vec<Vec<RewardBreakdown>>,
    decisions: Vec<SplineDecision>,
    decision_of: Vec<Option<usize>>,
    samples: Vec<Vec<AgentSample>>,
    env_rng: rand_chacha::ChaCha8Rng,
    obs_rng: rand_chacha::ChaCha8Rng,
    act_rng: rand_chacha::ChaCha8Rng,
}

impl Runner<'_> {
    /// Sets up bookkeeping for new agents and, under the spline model, picks
    /// each one's path from its spawn observation.
    fn admit(&mut self, ids: &[usize]) -> Result<()> {
        for &id in ids {
            self.histories.push(self.env.sensor.history());
            self.rewards.push(Vec::new());
            self.samples.push(Vec::new());
            self.decision_of.push(None);
            debug_assert_eq!(self.histories.len(), id + 1);
            if self.env.cfg.model != ModelKind::Spline {
                continue;
            }
            let scene = Scene::from_world(&self.world);
            let mut scratch = LidarHistory::new(self.env.sensor.n_rays, 1);
            let obs = self.env.sensor.observe(&self.world, &scene, id, &mut scratch, &mut self.obs_rng)?;
            let features = obs.spline_features();
            let dist = self.params.forward_spline(&features)?;
            let bins = self.settings.spline.pick(&dist, &mut self.act_rng);
            let v = &self.world.vehicles[id];
            let path = decode_spline(&v.centerline, v.road_width, &bins)?;
            self.world.assign_path(id, path)?;
            self.decision_of[id] = Some(self.decisions.len());
            self.decisions.push(SplineDecision {
                agent: id,
                log_prob: dist.log_prob(&bins),
                features,
                bins,
                ret: 0.0,
            });
        }
        Ok(())
    }

    fn observe_all(&mut self, ids: &[usize]) -> Result<Vec<crate::sensing::Observation>> {
        let scene = Scene::from_world(&self.world);
        ids.iter()
            .map(|&id| {
                self.env
                    .sensor
                    .observe(&self.world, &scene, id, &mut self.histories[id], &mut self.obs_rng)
            })
            .collect()
    }

    fn tick(&mut self) -> Result<Option<JointTick>> {
        let ids = self.world.active_ids();
        if ids.is_empty() {
            self.world.step(&[])?;
            return Ok(None);
        }
        let obs = self.observe_all(&ids)?;
        let features: Vec<Vec<f64>> = obs.iter().map(|o| o.accel_features()).collect();
        let values = if self.settings.collect_ticks {
            let refs: Vec<&[f64]> = features.iter().map(|f| f.as_slice()).collect();
            self.params.critic_group(&refs)?.0
        } else {
            vec![0.0; ids.len()]
        };
        let (a_max, horizon) = (self.world.params.a_max, self.world.params.horizon);
        let mut chosen = Vec::with_capacity(ids.len());
        let mut actions = Vec::with_capacity(ids.len());
        for (&id, f) in ids.iter().zip(&features) {
            let dist = self.params.forward_accel(f)?;
            let a = self.settings.accel.pick(&dist, &mut self.act_rng);
            actions.push(AgentAction {
                agent: id,
                accel: a[0],
                message: a.get(1).copied().unwrap_or(0) as u8,
            });
            chosen.push((dist.log_prob(&a), a));
        }
        let prev: Vec<f64> = ids
            .iter()
            .map(|&id| accel_value(self.world.vehicles[id].last_action, a_max))
            .collect();
        let pre: Vec<(crate::geometry::Pose, f64, bool)> = ids
            .iter()
            .map(|&id| {
                let v = &self.world.vehicles[id];
                (v.pose, v.speed, v.in_intersection)
            })
            .collect();
        let events = self.world.step(&actions)?;

        let mut steps = Vec::new();
        for (k, &id) in ids.iter().enumerate() {
            let ev = events.get(id).expect("every actor reports events");
            let v = &self.world.vehicles[id];
            let r = compute_reward(
                prev[k],
                accel_value(actions[k].accel, a_max),
                RewardEvents {
                    reached_goal: ev.reached_goal,
                    first_collision: ev.collided(),
                },
                v.goal_distance(),
                v.goal_distance_init,
                horizon,
                a_max,
            );
            self.rewards[id].push(r);
            if self.settings.record_log {
                let o = &obs[k];
                self.samples[id].push(AgentSample {
                    tick: self.world.tick - 1,
                    pose: pre[k].0,
                    speed: pre[k].1,
                    accel: actions[k].accel,
                    accel_value: accel_value(actions[k].accel, a_max) * v.rating,
                    message: actions[k].message,
                    received: o.message,
                    signal_code: o.signal_code,
                    in_intersection: pre[k].2,
                    reward: r,
                    status: v.status,
                    obs_digest: o.digest(),
                    obs: self.settings.log_observations.then(|| features[k].clone()),
                });
            }
            if self.settings.collect_ticks {
                let (log_prob, a) = chosen[k].clone();
                steps.push(AgentStep {
                    agent: id,
                    features: features[k].clone(),
                    actions: a,
                    log_prob,
                    value: values[k],
                    reward: r.total,
                    done: !v.is_active(),
                    advantage: 0.0,
                    ret: 0.0,
                });
            }
        }
        Ok(self.settings.collect_ticks.then_some(JointTick { steps }))
    }
}

/// Runs one episode. All randomness derives from `seed`.
pub fn run_episode(env: &Env, params: &PolicyParams, settings: &RolloutSettings, episode: u64, seed: u64) -> Result<EpisodeOutcome> {
    let mut env_rng = stream_rng(seed, 0, 0);
    let world = World::spawn(&env.cfg, env.map.clone(), episode, &mut env_rng)?;
    let mut r = Runner {
        env,
        params,
        settings,
        world,
        histories: Vec::new(),
        rewards: Vec::new(),
        decisions: Vec::new(),
        decision_of: Vec::new(),
        samples: Vec::new(),
        env_rng,
        obs_rng: stream_rng(seed, 1, 0),
        act_rng: stream_rng(seed, 2, 0),
    };
    let initial: Vec<usize> = (0..r.world.vehicles.len()).collect();
    r.admit(&initial)?;
    let mut ticks = Vec::new();
    let mut signals = Vec::new();
    let mut pedestrians = Vec::new();
    while !r.world.is_done() {
        if settings.record_log {
            let t = r.world.tick;
            if r.world.signals.is_some() {
                signals.push(SignalSample {
                    tick: t,
                    phases: (0..r.world.map.roads.len()).map(|id| r.world.signal_phase(id).unwrap()).collect(),
                });
            }
            pedestrians.extend(r.world.pedestrians.iter().map(|p| PedestrianSample {
                tick: t,
                id: p.id,
                position: p.position,
                active: p.active,
            }));
        }
        if let Some(t) = r.tick()? {
            ticks.push(t);
        }
        let new = r.world.respawn(&mut r.env_rng)?;
        r.admit(&new)?;
    }

    let mut bootstrap = vec![0.0; r.world.vehicles.len()];
    let still = r.world.active_ids();
    if settings.collect_ticks && !still.is_empty() {
        let feats: Vec<Vec<f64>> = r.observe_all(&still)?.iter().map(|o| o.accel_features()).collect();
        let refs: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
        let (vals, _) = params.critic_group(&refs)?;
        for (&id, v) in still.iter().zip(vals) {
            bootstrap[id] = v;
        }
    }

    let mut agents = Vec::with_capacity(r.world.vehicles.len());
    for v in &r.world.vehicles {
        let ret = episode_return(&r.rewards[v.id])?;
        if let Some(d) = r.decision_of[v.id] {
            r.decisions[d].ret = ret.total;
        }
        agents.push(AgentOutcome {
            agent: v.id,
            ret,
            status: v.status,
            rating: v.rating,
            bootstrap: bootstrap[v.id],
        });
    }

    let log = settings.record_log.then(|| {
        let cfg = &env.cfg;
        EpisodeLog {
            header: LogHeader {
                schema: LOG_SCHEMA.into(),
                version: LOG_VERSION,
                map: cfg.map.clone(),
                model: cfg.model,
                episode,
                seed,
                dt: cfg.dynamics.dt,
                horizon: cfg.dynamics.horizon,
                a_max: cfg.dynamics.a_max,
                v_max: cfg.dynamics.v_max,
                comm_enabled: cfg.comm_enabled,
                n_rays: cfg.lidar.n_rays,
                noise_pct: cfg.lidar.noise_pct,
            },
            agents: r
                .world
                .vehicles
                .iter()
                .map(|v| AgentTrack {
                        summary: AgentSummary {
                            agent: v.id,
                            road: v.road,
                            goal_road: v.goal_road,
                            rating: v.rating,
                            spawn_tick: v.spawn_tick,
                            goal_distance_init: v.goal_distance_init,
                            arrival_tick: v.arrival_tick,
                            departure_tick: v.departure_tick,
                            status: v.status,
                            end_pose: v.pose,
                            path: path_points(&v.path),
                        },
                        samples: std::mem::take(&mut r.samples[v.id]),
                })
                .collect(),
            pedestrians,
            signals,
        }
    });

    Ok(EpisodeOutcome {
        episode,
        seed,
        ticks,
        decisions: r.decisions,
        agents,
        log,
    })
}

/// Runs independent episodes in parallel; results keep the input order, so
/// output is identical for any worker count.
pub fn collect_rollouts(env: &Env, params: &PolicyParams, settings: &RolloutSettings, episodes: &[(u64, u64)]) -> Result<Vec<EpisodeOutcome>> {
    episodes
        .par_iter()
        .map(|&(episode, seed)| run_episode(env, params, settings, episode, seed))
        .collect()
}

/// Fills `advantage` and `ret` of every step by running GAE along each
/// agent's own trajectory.
pub fn compute_advantages(outcome: &mut EpisodeOutcome, gamma: f64, lambda: f64) {
    let n_agents = outcome.agents.len();
    let mut where_: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_agents];
    for (t, tick) in outcome.ticks.iter().enumerate() {
        for (k, s) in tick.steps.iter().enumerate() {
            where_[s.agent].push((t, k));
        }
    }
    for (agent, locs) in where_.iter().enumerate() {
        if locs.is_empty() {
            continue;
        }
        let step = |&(t, k): &(usize, usize)| &outcome.ticks[t].steps[k];
        let rewards: Vec<f64> = locs.iter().map(|l| step(l).reward).collect();
        let values: Vec<f64> = locs.iter().map(|l| step(l).value).collect();
        let dones: Vec<bool> = locs.iter().map(|l| step(l).done).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, outcome.agents[agent].bootstrap, gamma, lambda);
        for (i, &(t, k)) in locs.iter().enumerate() {
            let s = &mut outcome.ticks[t].steps[k];
            s.advantage = adv[i];
            s.ret = ret[i];
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RolloutStats {
    pub episodes: usize,
    pub agent_episodes: usize,
    pub mean_return: f64,
    pub collision_rate: f64,
    pub goal_rate: f64,
}

pub fn summarize(outcomes: &[EpisodeOutcome]) -> RolloutStats {
    let agents: Vec<&AgentOutcome> = outcomes.iter().flat_map(|o| &o.agents).collect();
    let n = agents.len().max(1) as f64;
    RolloutStats {
        episodes: outcomes.len(),
        agent_episodes: agents.len(),
        mean_return: agents.iter().map(|a| a.ret.total).sum::<f64>() / n,
        collision_rate: agents
            .iter()
            .filter(|a| matches!(a.status, Status::Collided | Status::OffRoad))
            .count() as f64
            / n,
        goal_rate: agents.iter().filter(|a| a.status == Status::Reached).count() as f64 / n,
    }
}

/// Episode ids and seeds for evaluation, independent of training streams.
pub fn evaluation_seeds(root: u64, count: usize) -> Vec<(u64, u64)> {
    (0..count as u64)
        .map(|e| (e, crate::rng::derive_seed(root, domain::EVAL, e)))
        .collect()
}

/// Spline points (without the duplicated ends) an agent would follow.
pub fn path_points(path: &crate::geometry::Spline) -> Vec<Vec2> {
    let cps = path.control_points();
    cps[1..cps.len() - 1].to_vec()
}
