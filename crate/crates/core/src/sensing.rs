//! Per-agent observations: noisy stacked LiDAR, dashboard readings, the
//! traffic-signal code and the one-bit message channel.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, ray_cast, ray_circle_hit, Pose, Segment, Vec2};
use crate::world::{Phase, World};

pub const LIDAR_RANGE: f64 = 50.0;
pub const SIGNAL_SENSE_RANGE: f64 = 35.0;
pub const SIGNAL_SENSE_CONE: f64 = std::f64::consts::PI / 3.0;
pub const MESSAGE_CONE: f64 = std::f64::consts::PI / 6.0;
pub const SIGNAL_NONE: f64 = 0.75;
/// Dashboard entries appended after the LiDAR stack.
pub const DASHBOARD_LEN: usize = 5;

pub fn signal_code(phase: Phase) -> f64 {
    match phase {
        Phase::Red => 0.0,
        Phase::Yellow => 0.5,
        Phase::Green => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarFrame {
    pub ranges: Vec<f64>,
}

impl LidarFrame {
    pub fn zeros(n_rays: usize) -> Self {
        LidarFrame { ranges: vec![0.0; n_rays] }
    }
}

/// Everything a LiDAR ray can hit at one instant.
pub struct Scene {
    walls: Vec<Segment>,
    /// Edges of every vehicle body, tagged with the owner's id.
    bodies: Vec<(usize, Segment)>,
    pedestrians: Vec<(Vec2, f64)>,
}

impl Scene {
    pub fn from_world(world: &World) -> Self {
        let bodies = world
            .vehicles
            .iter()
            .filter(|v| v.status.is_body())
            .flat_map(|v| v.footprint().edges().into_iter().map(move |e| (v.id, e)))
            .collect();
        let pedestrians = world
            .pedestrians
            .iter()
            .filter(|p| p.active)
            .map(|p| (p.position, p.radius))
            .collect();
        Scene {
            walls: world.walls().to_vec(),
            bodies,
            pedestrians,
        }
    }

    /// Equi-angular scan from the centre of a body with the given pose and
    /// half-extents. Ranges are measured from the body's own surface, so a
    /// wall touching the front bumper reads 0 on the forward ray.
    pub fn scan(&self, pose: Pose, half_extents: Vec2, exclude: Option<usize>, n_rays: usize) -> LidarFrame {
        let others: Vec<Segment> = self
            .bodies
            .iter()
            .filter(|(id, _)| Some(*id) != exclude)
            .map(|&(_, s)| s)
            .collect();
        let ranges = (0..n_rays)
            .map(|i| {
                let rel = std::f64::consts::TAU * i as f64 / n_rays as f64;
                let inset = body_inset(rel, half_extents);
                let dir = pose.heading + rel;
                let limit = LIDAR_RANGE + inset;
                let mut t = ray_cast(pose.position, dir, &self.walls, limit);
                t = t.min(ray_cast(pose.position, dir, &others, limit));
                for &(c, r) in &self.pedestrians {
                    if let Some(h) = ray_circle_hit(pose.position, dir, c, r) {
                        t = t.min(h);
                    }
                }
                if t >= limit {
                    LIDAR_RANGE
                } else {
                    (t - inset).clamp(0.0, LIDAR_RANGE)
                }
            })
            .collect();
        LidarFrame { ranges }
    }
}

/// Distance from a rectangle's centre to its boundary along a direction given
/// relative to the rectangle's heading.
pub fn body_inset(relative_angle: f64, half_extents: Vec2) -> f64 {
    let (s, c) = relative_angle.sin_cos();
    let tx = if c.abs() > 0.0 { half_extents.x / c.abs() } else { f64::INFINITY };
    let ty = if s.abs() > 0.0 { half_extents.y / s.abs() } else { f64::INFINITY };
    tx.min(ty)
}

fn require_active(world: &World, agent: usize) -> Result<()> {
    match world.vehicle(agent) {
        Some(v) if v.is_active() => Ok(()),
        Some(_) => Err(Error::Contract(format!("agent {agent} is not active"))),
        None => Err(Error::Contract(format!("no agent {agent}"))),
    }
}

pub fn lidar_scan(world: &World, agent: usize, n_rays: usize) -> Result<LidarFrame> {
    require_active(world, agent)?;
    let v = &world.vehicles[agent];
    Ok(Scene::from_world(world).scan(v.pose, v.half_extents, Some(agent), n_rays))
}

/// Zeroes exactly `round(pct · n / 100)` distinct rays chosen uniformly.
pub fn apply_dropout<R: Rng>(mut frame: LidarFrame, noise_pct: f64, rng: &mut R) -> LidarFrame {
    let n = frame.ranges.len();
    let k = ((noise_pct * n as f64 / 100.0).round() as usize).min(n);
    if k > 0 {
        for i in rand::seq::index::sample(rng, n, k) {
            frame.ranges[i] = 0.0;
        }
    }
    frame
}

/// Signal code for the nearest signal guarding the agent's approach road that
/// is within range and inside the agent's forward cone.
pub fn sense_signal(world: &World, agent: usize) -> Result<f64> {
    require_active(world, agent)?;
    let Some(state) = world.signals else { return Ok(SIGNAL_NONE) };
    let v = &world.vehicles[agent];
    let seen = world
        .map
        .signals
        .iter()
        .filter(|s| s.road == v.road)
        .map(|s| (v.pose.position.distance(s.position), s))
        .filter(|(d, s)| *d <= SIGNAL_SENSE_RANGE && v.pose.bearing_to(s.position).abs() <= SIGNAL_SENSE_CONE)
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(match seen {
        Some((_, s)) => signal_code(state.phase(world.map.road(s.road).signal_group)),
        None => SIGNAL_NONE,
    })
}

/// Message bit of the nearest active vehicle within the forward ±30° cone
/// (ties go to the lowest id); 0 when nobody qualifies or the channel is off.
pub fn receive_message(world: &World, agent: usize, enabled: bool) -> Result<u8> {
    require_active(world, agent)?;
    if !enabled {
        return Ok(0);
    }
    let me = &world.vehicles[agent];
    let sender = world
        .vehicles
        .iter()
        .filter(|o| o.id != agent && o.is_active())
        .filter(|o| me.pose.bearing_to(o.pose.position).abs() <= MESSAGE_CONE)
        .min_by(|a, b| {
            let da = me.pose.position.distance(a.pose.position);
            let db = me.pose.position.distance(b.pose.position);
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        });
    Ok(sender.map_or(0, |o| o.message_bit))
}

/// The most recent post-dropout frames, oldest first, zero-padded at start.
#[derive(Debug, Clone)]
pub struct LidarHistory {
    frames: VecDeque<LidarFrame>,
}

impl LidarHistory {
    pub fn new(n_rays: usize, depth: usize) -> Self {
        LidarHistory {
            frames: std::iter::repeat_with(|| LidarFrame::zeros(n_rays)).take(depth).collect(),
        }
    }

    pub fn push(&mut self, frame: LidarFrame) {
        self.frames.pop_front();
        self.frames.push_back(frame);
    }

    pub fn frames(&self) -> impl Iterator<Item = &LidarFrame> {
        self.frames.iter()
    }

    pub fn latest(&self) -> &LidarFrame {
        self.frames.back().expect("history depth is at least 1")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lidar_stack: Vec<LidarFrame>,
    /// Remaining path length over the initial path length.
    pub goal_distance: f64,
    /// Radians from the heading to the goal, in (−π, π].
    pub goal_bearing: f64,
    /// Speed over the agent's own speed limit.
    pub speed: f64,
    pub signal_code: f64,
    pub message: u8,
    pub rating: f64,
}

impl Observation {
    fn dashboard(&self) -> [f64; DASHBOARD_LEN] {
        [
            self.goal_distance,
            self.goal_bearing / std::f64::consts::PI,
            self.speed,
            self.signal_code,
            self.message as f64,
        ]
    }

    /// Input vector of the acceleration policy and critic encoder.
    pub fn accel_features(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self
            .lidar_stack
            .iter()
            .flat_map(|fr| fr.ranges.iter().map(|r| r / LIDAR_RANGE))
            .collect();
        f.extend(self.dashboard());
        f
    }

    /// Input vector of the spline policy: latest frame, dashboard, rating.
    pub fn spline_features(&self) -> Vec<f64> {
        let last = self.lidar_stack.last().map(|fr| fr.ranges.as_slice()).unwrap_or(&[]);
        let mut f: Vec<f64> = last.iter().map(|r| r / LIDAR_RANGE).collect();
        f.extend(self.dashboard());
        f.push(self.rating);
        f
    }

    /// FNV-1a over the little-endian bytes of the acceleration features.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.accel_features() {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

pub fn accel_feature_dim(n_rays: usize, stack: usize) -> usize {
    n_rays * stack + DASHBOARD_LEN
}

pub fn spline_feature_dim(n_rays: usize) -> usize {
    n_rays + DASHBOARD_LEN + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub n_rays: usize,
    pub noise_pct: f64,
    pub stack: usize,
    pub comm_enabled: bool,
}

impl Sensor {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Sensor {
            n_rays: cfg.lidar.n_rays,
            noise_pct: cfg.lidar.noise_pct,
            stack: cfg.lidar.stack,
            comm_enabled: cfg.comm_enabled,
        }
    }

    pub fn history(&self) -> LidarHistory {
        LidarHistory::new(self.n_rays, self.stack)
    }

    /// Scans, applies dropout, pushes the frame into `history` and assembles
    /// the observation.
    pub fn observe<R: Rng>(
        &self,
        world: &World,
        scene: &Scene,
        agent: usize,
        history: &mut LidarHistory,
        rng: &mut R,
    ) -> Result<Observation> {
        require_active(world, agent)?;
        let v = &world.vehicles[agent];
        let frame = scene.scan(v.pose, v.half_extents, Some(agent), self.n_rays);
        history.push(apply_dropout(frame, self.noise_pct, rng));
        let goal_bearing = if v.pose.position.distance(v.goal) > 0.0 {
            v.pose.bearing_to(v.goal)
        } else {
            0.0
        };
        Ok(Observation {
            lidar_stack: history.frames().cloned().collect(),
            goal_distance: v.goal_distance() / v.goal_distance_init,
            goal_bearing: normalize_angle(goal_bearing),
            speed: v.speed / v.speed_limit(world.params.v_max),
            signal_code: sense_signal(world, agent)?,
            message: receive_message(world, agent, self.comm_enabled)?,
            rating: v.rating,
        })
    }
}
