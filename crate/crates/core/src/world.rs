//! Simulation state and dynamics: vehicles driving along splines, pedestrians,
//! traffic signals, collision and goal resolution.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, RouteMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{convex_overlap, point_in_polygon, rect_overlap, OrientedRect, Pose, Segment, Spline, Vec2};
use crate::map::{offset_polyline, route_centerline, MapSpec};

/// Vehicle footprint half-extents: 4.5 m × 2.0 m.
pub const VEHICLE_HALF_EXTENTS: Vec2 = Vec2::new(2.25, 1.0);
pub const PEDESTRIAN_RADIUS: f64 = 0.4;
pub const PEDESTRIAN_SPEED: f64 = 1.4;
/// Pedestrians start up to this far before the curb so arrivals are staggered.
const PEDESTRIAN_STAGGER: f64 = 20.0;
pub const RATINGS: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];
/// Fractions of `a_max` selectable by the acceleration policy.
pub const ACCEL_FRACTIONS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
pub const NUM_ACCELS: usize = ACCEL_FRACTIONS.len();
/// Clearance required around a respawned footprint.
const RESPAWN_MARGIN: f64 = 0.5;

pub fn accel_value(index: usize, a_max: f64) -> f64 {
    ACCEL_FRACTIONS[index] * a_max
}

/// Constant-acceleration step that never reverses and never exceeds `v_cap`.
/// Returns the new speed and the distance travelled.
pub fn integrate_longitudinal(v: f64, a: f64, dt: f64, v_cap: f64) -> (f64, f64) {
    let v_free = v + a * dt;
    if v_free < 0.0 {
        // Stops part-way through the tick.
        (0.0, v * v / (2.0 * -a))
    } else if v_free > v_cap {
        let t_cap = ((v_cap - v) / a).clamp(0.0, dt);
        let ds = v * t_cap + 0.5 * a * t_cap * t_cap + v_cap * (dt - t_cap);
        (v_cap, ds)
    } else {
        (v_free, v * dt + 0.5 * a * dt * dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Red,
    Yellow,
    Green,
}

/// Two orthogonal approach groups cycling green → yellow → red, offset by
/// half a cycle so at most one group is ever non-red.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalState {
    pub green: f64,
    pub yellow: f64,
    /// Time since the start of group 0's green, in `[0, cycle)`.
    pub clock: f64,
}

impl SignalState {
    pub const DEFAULT_GREEN: f64 = 15.0;
    pub const DEFAULT_YELLOW: f64 = 3.0;

    pub fn new(green: f64, yellow: f64, clock: f64) -> Self {
        let s = SignalState { green, yellow, clock: 0.0 };
        SignalState {
            clock: clock.rem_euclid(s.cycle()),
            ..s
        }
    }

    pub fn cycle(&self) -> f64 {
        2.0 * (self.green + self.yellow)
    }

    fn group_clock(&self, group: usize) -> f64 {
        let offset = if group % 2 == 0 { 0.0 } else { self.green + self.yellow };
        (self.clock - offset).rem_euclid(self.cycle())
    }

    pub fn phase(&self, group: usize) -> Phase {
        let c = self.group_clock(group);
        if c < self.green {
            Phase::Green
        } else if c < self.green + self.yellow {
            Phase::Yellow
        } else {
            Phase::Red
        }
    }

    /// Seconds since the group's current phase began.
    pub fn phase_clock(&self, group: usize) -> f64 {
        let c = self.group_clock(group);
        match self.phase(group) {
            Phase::Green => c,
            Phase::Yellow => c - self.green,
            Phase::Red => c - self.green - self.yellow,
        }
    }

    pub fn advance(&self, dt: f64) -> SignalState {
        SignalState {
            clock: (self.clock + dt).rem_euclid(self.cycle()),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Reached,
    Collided,
    OffRoad,
}

impl Status {
    /// Halted bodies stay on the map as static obstacles.
    pub fn is_body(self) -> bool {
        self != Status::Reached
    }
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: usize,
    pub half_extents: Vec2,
    pub path: Arc<Spline>,
    /// Route axis from spawn to goal, used to lay out spline deviations.
    pub centerline: Arc<Vec<Vec2>>,
    pub road_width: f64,
    pub progress: f64,
    pub speed: f64,
    pub rating: f64,
    pub pose: Pose,
    pub goal: Vec2,
    pub goal_distance_init: f64,
    pub spawn_pocket: usize,
    pub goal_pocket: usize,
    pub road: usize,
    pub goal_road: usize,
    pub status: Status,
    /// Acceleration index taken last tick (the "no change" index before the first).
    pub last_action: usize,
    pub message_bit: u8,
    pub spawn_tick: u32,
    pub arrival_tick: Option<u32>,
    pub departure_tick: Option<u32>,
    pub in_intersection: bool,
}

impl VehicleState {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.pose, self.half_extents)
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Remaining longitudinal distance along the assigned path.
    pub fn goal_distance(&self) -> f64 {
        (self.path.length() - self.progress).max(0.0)
    }

    pub fn speed_limit(&self, v_max: f64) -> f64 {
        self.rating * v_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub active: bool,
    /// Point past which the pedestrian has finished crossing.
    pub exit: Vec2,
}

/// Physical world parameters resolved from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    pub dt: f64,
    pub horizon: u32,
    pub a_max: f64,
    pub v_max: f64,
    pub n_agents: usize,
    pub continuous_spawn: bool,
    pub ratings: bool,
    pub signals: bool,
    pub max_pedestrians: Option<usize>,
    pub route: RouteMode,
    pub model: ModelKind,
}

impl WorldParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        WorldParams {
            dt: cfg.dynamics.dt,
            horizon: cfg.dynamics.horizon,
            a_max: cfg.dynamics.a_max,
            v_max: cfg.dynamics.v_max,
            n_agents: cfg.agents.count,
            continuous_spawn: cfg.agents.continuous_spawn,
            ratings: cfg.agents.ratings,
            signals: cfg.signals_enabled,
            max_pedestrians: cfg.pedestrians.enabled.then_some(cfg.pedestrians.max_count),
            route: cfg.route,
            model: cfg.model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentAction {
    pub agent: usize,
    pub accel: usize,
    pub message: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentEvents {
    pub agent: usize,
    pub reached_goal: bool,
    pub collided_vehicle: bool,
    pub collided_pedestrian: bool,
    pub went_off_road: bool,
    pub partners: Vec<usize>,
}

impl AgentEvents {
    pub fn collided(&self) -> bool {
        self.collided_vehicle || self.collided_pedestrian || self.went_off_road
    }
}

/// Per-agent outcome of one tick, for every agent that acted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    pub agents: Vec<AgentEvents>,
}

impl StepEvents {
    pub fn get(&self, agent: usize) -> Option<&AgentEvents> {
        self.agents.iter().find(|e| e.agent == agent)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub tick: u32,
    pub map: Arc<MapSpec>,
    pub params: WorldParams,
    pub vehicles: Vec<VehicleState>,
    pub pedestrians: Vec<PedestrianState>,
    pub signals: Option<SignalState>,
    /// Identifier of the RNG stream this world was spawned from.
    pub stream: u64,
    walls: Arc<Vec<Segment>>,
}

impl World {
    /// Places up to `agents.count` vehicles in distinct spawn pockets.
    pub fn spawn<R: Rng>(cfg: &ScenarioConfig, map: Arc<MapSpec>, stream: u64, rng: &mut R) -> Result<Self> {
        cfg.validate_against(&map)?;
        let params = WorldParams::from_config(cfg);
        let signals = (params.signals && !map.signals.is_empty()).then(|| {
            let s = SignalState::new(SignalState::DEFAULT_GREEN, SignalState::DEFAULT_YELLOW, 0.0);
            let steps = (s.cycle() / params.dt).round() as u64;
            SignalState::new(s.green, s.yellow, rng.gen_range(0..steps) as f64 * params.dt)
        });
        let walls = Arc::new(map.boundary_segments());
        let mut world = World {
            tick: 0,
            map,
            params,
            vehicles: Vec::new(),
            pedestrians: Vec::new(),
            signals,
            stream,
            walls,
        };
        let order = world.pocket_order(rng);
        let mut placed = 0;
        for pocket in order {
            if placed == world.params.n_agents {
                break;
            }
            if world.try_spawn(pocket, rng, 0.0)? {
                placed += 1;
            }
        }
        if placed < world.params.n_agents {
            return Err(Error::config(
                "agents.count",
                format!("only {placed} of {} agents fit without overlap", world.params.n_agents),
            ));
        }
        if let Some(max) = world.params.max_pedestrians {
            world.spawn_pedestrians(max, rng);
        }
        Ok(world)
    }

    /// Pockets shuffled within tiers, lower tiers first.
    fn pocket_order<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.map.spawn_pockets.len()).collect();
        idx.shuffle(rng);
        idx.sort_by_key(|&i| self.map.spawn_pockets[i].tier);
        idx
    }

    fn choose_goal<R: Rng>(&self, spawn_road: usize, rng: &mut R) -> usize {
        let goals = &self.map.goal_pockets;
        let n_roads = self.map.roads.len();
        let candidates: Vec<usize> = match self.params.route {
            RouteMode::Straight if n_roads >= 4 => {
                let opposite = (spawn_road + n_roads / 2) % n_roads;
                (0..goals.len()).filter(|&g| goals[g].road == opposite).collect()
            }
            _ => (0..goals.len()).filter(|&g| goals[g].road != spawn_road).collect(),
        };
        let pool: Vec<usize> = if candidates.is_empty() { (0..goals.len()).collect() } else { candidates };
        pool[rng.gen_range(0..pool.len())]
    }

    /// Spawns into `pocket` unless the footprint would overlap an existing body.
    fn try_spawn<R: Rng>(&mut self, pocket_idx: usize, rng: &mut R, margin: f64) -> Result<bool> {
        let pocket = self.map.spawn_pockets[pocket_idx].clone();
        let dir = Vec2::from_angle(pocket.heading);
        let jitter = if pocket.jitter > 0.0 { rng.gen_range(-pocket.jitter..=pocket.jitter) } else { 0.0 };
        let start = pocket.anchor + dir * jitter;
        let probe = OrientedRect::new(Pose::new(start, pocket.heading), VEHICLE_HALF_EXTENTS + Vec2::new(margin, margin));
        if self.vehicles.iter().any(|v| v.status.is_body() && rect_overlap(&probe, &v.footprint())) {
            return Ok(false);
        }
        let goal_pocket = self.choose_goal(pocket.road, rng);
        let goal = &self.map.goal_pockets[goal_pocket];
        let road = self.map.road(pocket.road);
        let centerline = route_centerline(&self.map, start, pocket.road, goal.anchor, goal.road);
        let lane = offset_polyline(&centerline, road.lane_offset);
        let mut waypoints = lane.clone();
        waypoints[0] = start;
        let path = Spline::through(&waypoints)?;
        let rating = if self.params.ratings {
            RATINGS[rng.gen_range(0..RATINGS.len())]
        } else {
            1.0
        };
        let id = self.vehicles.len();
        let start_pt = path.point_at_arclength(0.0);
        let vehicle = VehicleState {
            id,
            half_extents: VEHICLE_HALF_EXTENTS,
            goal: path.end(),
            goal_distance_init: path.length(),
            path: Arc::new(path),
            centerline: Arc::new(centerline),
            road_width: road.width.unwrap_or(0.0),
            progress: 0.0,
            speed: 0.0,
            rating,
            pose: Pose::new(start_pt.position, start_pt.heading),
            spawn_pocket: pocket_idx,
            goal_pocket,
            road: pocket.road,
            goal_road: goal.road,
            status: Status::Active,
            last_action: ACCEL_FRACTIONS.iter().position(|&f| f == 0.0).unwrap(),
            message_bit: 0,
            spawn_tick: self.tick,
            arrival_tick: None,
            departure_tick: None,
            in_intersection: false,
        };
        self.vehicles.push(vehicle);
        let v = self.vehicles.last_mut().unwrap();
        if let Some(region) = &self.map.intersection_region {
            v.in_intersection = convex_overlap(&v.footprint().corners(), region);
            if v.in_intersection {
                v.arrival_tick = Some(self.tick);
            }
        }
        Ok(true)
    }

    fn spawn_pedestrians<R: Rng>(&mut self, max: usize, rng: &mut R) {
        let Some(cw) = self.map.crosswalk.clone() else { return };
        let count = rng.gen_range(1..=max);
        let [a, b] = cw.segment;
        for id in 0..count {
            let (entry, exit) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            let dir = (exit - entry).normalized();
            let lateral = dir.perp() * rng.gen_range(-cw.width / 2.0..=cw.width / 2.0);
            let back = rng.gen_range(0.0..=PEDESTRIAN_STAGGER);
            self.pedestrians.push(PedestrianState {
                id,
                position: entry + lateral - dir * back,
                velocity: dir * PEDESTRIAN_SPEED,
                radius: PEDESTRIAN_RADIUS,
                active: true,
                exit: exit + lateral + dir,
            });
        }
    }

    /// Replaces an agent's path (spline model) and resets it to the path start.
    pub fn assign_path(&mut self, agent: usize, path: Spline) -> Result<()> {
        let v = self
            .vehicles
            .get_mut(agent)
            .ok_or_else(|| Error::Contract(format!("no agent {agent}")))?;
        if !v.is_active() {
            return Err(Error::Contract(format!("agent {agent} is not active")));
        }
        let p = path.point_at_arclength(0.0);
        v.pose = Pose::new(p.position, p.heading);
        v.progress = 0.0;
        v.goal = path.end();
        v.goal_distance_init = path.length();
        v.path = Arc::new(path);
        Ok(())
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn vehicle(&self, id: usize) -> Option<&VehicleState> {
        self.vehicles.get(id)
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.vehicles.iter().filter(|v| v.is_active()).map(|v| v.id).collect()
    }

    pub fn active_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.is_active()).count()
    }

    /// Episode over: horizon reached, or nobody left and nobody coming.
    pub fn is_done(&self) -> bool {
        self.tick >= self.params.horizon || (self.active_count() == 0 && !self.params.continuous_spawn)
    }

    pub fn signal_phase(&self, road: usize) -> Option<Phase> {
        self.signals.map(|s| s.phase(self.map.road(road).signal_group))
    }

    /// Advances one tick given exactly one action per active agent.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepEvents> {
        let dt = self.params.dt;
        let mut acted = vec![false; self.vehicles.len()];
        for a in actions {
            let v = self
                .vehicles
                .get(a.agent)
                .ok_or_else(|| Error::Contract(format!("action for unknown agent {}", a.agent)))?;
            if !v.is_active() {
                return Err(Error::Contract(format!("action for inactive agent {}", a.agent)));
            }
            if a.accel >= NUM_ACCELS {
                return Err(Error::Contract(format!("acceleration index {} out of range", a.accel)));
            }
            if std::mem::replace(&mut acted[a.agent], true) {
                return Err(Error::Contract(format!("two actions for agent {}", a.agent)));
            }
        }
        if let Some(missing) = self.vehicles.iter().find(|v| v.is_active() && !acted[v.id]) {
            return Err(Error::Contract(format!("no action for active agent {}", missing.id)));
        }

        for a in actions {
            let (a_max, v_max) = (self.params.a_max, self.params.v_max);
            let v = &mut self.vehicles[a.agent];
            let accel = accel_value(a.accel, a_max) * v.rating;
            let (speed, ds) = integrate_longitudinal(v.speed, accel, dt, v.speed_limit(v_max));
            let length = v.path.length();
            v.progress = (v.progress + ds).min(length);
            v.speed = if v.progress >= length { 0.0 } else { speed };
            let p = v.path.point_at_arclength(v.progress);
            v.pose = Pose::new(p.position, p.heading);
            v.last_action = a.accel;
            v.message_bit = a.message;
        }

        for p in self.pedestrians.iter_mut().filter(|p| p.active) {
            p.position += p.velocity * dt;
            if (p.position - p.exit).dot(p.velocity) > 0.0 {
                p.active = false;
            }
        }
        if let Some(s) = self.signals {
            self.signals = Some(s.advance(dt));
        }

        let mut events: Vec<AgentEvents> = actions
            .iter()
            .map(|a| AgentEvents {
                agent: a.agent,
                ..Default::default()
            })
            .collect();
        let slot = |events: &[AgentEvents], id: usize| events.iter().position(|e| e.agent == id);
        let footprints: Vec<Option<OrientedRect>> = self
            .vehicles
            .iter()
            .map(|v| v.status.is_body().then(|| v.footprint()))
            .collect();
        for i in 0..self.vehicles.len() {
            let Some(fi) = footprints[i] else { continue };
            for j in (i + 1)..self.vehicles.len() {
                let Some(fj) = footprints[j] else { continue };
                let (ai, aj) = (acted[i], acted[j]);
                if !(ai || aj) || !rect_overlap(&fi, &fj) {
                    continue;
                }
                for (me, other, active) in [(i, j, ai), (j, i, aj)] {
                    if active {
                        let k = slot(&events, me).unwrap();
                        let e = &mut events[k];
                        e.collided_vehicle = true;
                        e.partners.push(other);
                    }
                }
            }
        }
        for e in events.iter_mut() {
            let v = &self.vehicles[e.agent];
            let fp = footprints[e.agent].unwrap();
            e.collided_pedestrian = self
                .pedestrians
                .iter()
                .any(|p| p.active && rect_circle_overlap(&fp, p.position, p.radius));
            e.went_off_road = !fp.corners().iter().all(|&c| self.map.is_drivable(c));
            if !e.collided() {
                let goal = &self.map.goal_pockets[v.goal_pocket];
                e.reached_goal = point_in_polygon(v.pose.position, &goal.region);
            }
        }

        let next_tick = self.tick + 1;
        for e in &events {
            let v = &mut self.vehicles[e.agent];
            v.status = if e.collided_vehicle || e.collided_pedestrian {
                Status::Collided
            } else if e.went_off_road {
                Status::OffRoad
            } else if e.reached_goal {
                Status::Reached
            } else {
                Status::Active
            };
            if let Some(region) = &self.map.intersection_region {
                let inside = convex_overlap(&v.footprint().corners(), region);
                if inside && v.arrival_tick.is_none() {
                    v.arrival_tick = Some(next_tick);
                }
                if !inside && v.in_intersection && v.departure_tick.is_none() {
                    v.departure_tick = Some(next_tick);
                }
                v.in_intersection = inside;
            }
        }
        self.tick = next_tick;
        Ok(StepEvents { agents: events })
    }

    /// Tops the active count back up to the target by spawning into free
    /// pockets. Returns the ids of new agents.
    pub fn respawn<R: Rng>(&mut self, rng: &mut R) -> Result<Vec<usize>> {
        let mut spawned = Vec::new();
        if !self.params.continuous_spawn || self.tick >= self.params.horizon {
            return Ok(spawned);
        }
        let order = self.pocket_order(rng);
        for pocket in order {
            if self.active_count() >= self.params.n_agents {
                break;
            }
            if self.try_spawn(pocket, rng, RESPAWN_MARGIN)? {
                spawned.push(self.vehicles.len() - 1);
            }
        }
        Ok(spawned)
    }
}

pub fn rect_circle_overlap(rect: &OrientedRect, center: Vec2, radius: f64) -> bool {
    let f = rect.pose.forward();
    let d = center - rect.pose.position;
    let local = Vec2::new(d.dot(f), d.dot(f.perp()));
    let nearest = Vec2::new(
        local.x.clamp(-rect.half_extents.x, rect.half_extents.x),
        local.y.clamp(-rect.half_extents.y, rect.half_extents.y),
    );
    (local - nearest).norm_sq() <= radius * radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn cfg(map: &str, n: usize) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            map: map.into(),
            ..Default::default()
        };
        c.agents.count = n;
        c
    }

    fn world(c: &ScenarioConfig, seed: u64) -> World {
        let map = Arc::new(c.load_map().unwrap());
        World::spawn(c, map, 0, &mut stream_rng(seed, 0, 0)).unwrap()
    }

    #[test]
    fn kinematics_examples() {
        let (v, ds) = integrate_longitudinal(0.0, 2.5, 0.25, 10.0);
        assert_eq!(v, 0.625);
        assert_eq!(ds, 0.078125);
        // Braking through zero stops exactly at v²/2a.
        let (v, ds) = integrate_longitudinal(1.0, -5.0, 0.25, 10.0);
        assert_eq!(v, 0.0);
        assert_abs_diff_eq!(ds, 0.1, epsilon = 1e-15);
        let (v, ds) = integrate_longitudinal(9.9, 2.5, 0.25, 10.0);
        assert_eq!(v, 10.0);
        assert_abs_diff_eq!(ds, 9.9 * 0.04 + 0.5 * 2.5 * 0.04 * 0.04 + 10.0 * 0.21, epsilon = 1e-12);
    }

    #[test]
    fn signal_cycle() {
        let dt = 0.25;
        let s = SignalState::new(15.0, 3.0, 15.0 - dt);
        assert_eq!(s.phase(0), Phase::Green);
        let n = s.advance(dt);
        assert_eq!(n.phase(0), Phase::Yellow);
        assert_eq!(n.phase_clock(0), 0.0);
        let mut t = s;
        for _ in 0..(s.cycle() / dt) as usize {
            t = t.advance(dt);
            let non_red = [0, 1].iter().filter(|&&g| t.phase(g) != Phase::Red).count();
            assert!(non_red <= 1);
        }
        assert_eq!(t, s);
    }

    #[test]
    fn intersection_four_agents_one_per_arm() {
        let w = world(&cfg("intersection4", 4), 3);
        let mut roads: Vec<usize> = w.vehicles.iter().map(|v| v.road).collect();
        roads.sort();
        assert_eq!(roads, vec![0, 1, 2, 3]);
        for v in &w.vehicles {
            assert_eq!(v.goal_road, (v.road + 2) % 4);
            assert!(v.goal_distance_init > 0.0);
        }
    }

    #[test]
    fn spawn_is_deterministic() {
        let c = cfg("intersection4", 8);
        let a = world(&c, 11);
        let b = world(&c, 11);
        for (x, y) in a.vehicles.iter().zip(&b.vehicles) {
            assert_eq!(x.pose, y.pose);
            assert_eq!(x.goal_pocket, y.goal_pocket);
        }
        assert_eq!(a.signals, b.signals);
    }

    #[test]
    fn single_agent_spawn() {
        let w = world(&cfg("highway", 1), 0);
        assert_eq!(w.vehicles.len(), 1);
        assert!(w.signals.is_none());
    }

    #[test]
    fn too_many_agents_is_config_error() {
        let c = cfg("intersection4", 9);
        let map = Arc::new(c.load_map().unwrap());
        assert!(matches!(
            World::spawn(&c, map, 0, &mut stream_rng(0, 0, 0)),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn step_kinematics_and_contracts() {
        let mut w = world(&cfg("highway", 1), 0);
        let ev = w.step(&[AgentAction { agent: 0, accel: 4, message: 0 }]).unwrap();
        assert_eq!(ev.agents.len(), 1);
        assert_eq!(w.vehicles[0].speed, 0.625);
        assert_abs_diff_eq!(w.vehicles[0].progress, 0.078125, epsilon = 1e-15);
        assert!(w.step(&[]).is_err());
        assert!(w.step(&[AgentAction { agent: 3, accel: 0, message: 0 }]).is_err());
    }

    #[test]
    fn head_on_overlap_flags_both() {
        let mut c = cfg("intersection4", 2);
        c.signals_enabled = false;
        let mut w = world(&c, 5);
        // Put both cars at the same spot to force an overlap.
        let p = w.vehicles[0].pose;
        let path = w.vehicles[0].path.clone();
        w.vehicles[1].pose = p;
        w.vehicles[1].path = path;
        w.vehicles[1].progress = w.vehicles[0].progress;
        let acts = [
            AgentAction { agent: 0, accel: 2, message: 0 },
            AgentAction { agent: 1, accel: 2, message: 0 },
        ];
        let ev = w.step(&acts).unwrap();
        assert!(ev.get(0).unwrap().collided_vehicle && ev.get(1).unwrap().collided_vehicle);
        assert_eq!(ev.get(0).unwrap().partners, vec![1]);
        assert_eq!(ev.get(1).unwrap().partners, vec![0]);
        assert_eq!(w.vehicles[0].status, Status::Collided);
        // Halted agents may not act.
        assert!(w.step(&acts).is_err());
        assert!(w.step(&[]).is_ok());
    }

    #[test]
    fn reaching_goal_halts_agent() {
        let mut w = world(&cfg("highway", 1), 2);
        let mut ticks = 0;
        while w.vehicles[0].is_active() {
            w.step(&[AgentAction { agent: 0, accel: 4, message: 0 }]).unwrap();
            ticks += 1;
            assert!(ticks < 200);
        }
        assert_eq!(w.vehicles[0].status, Status::Reached);
        assert!(w.is_done());
    }

    #[test]
    fn speed_never_exceeds_rating_limit() {
        let mut c = cfg("highway", 6);
        c.agents.ratings = true;
        let mut w = world(&c, 9);
        let mut rng = stream_rng(1, 2, 3);
        while !w.is_done() {
            let acts: Vec<AgentAction> = w
                .active_ids()
                .into_iter()
                .map(|id| AgentAction { agent: id, accel: rng.gen_range(0..NUM_ACCELS), message: 0 })
                .collect();
            w.step(&acts).unwrap();
            for v in &w.vehicles {
                assert!(v.speed >= 0.0 && v.speed <= v.rating * w.params.v_max);
                assert!(RATINGS.contains(&v.rating));
            }
        }
    }

    #[test]
    fn respawn_blocked_pockets() {
        let mut c = cfg("intersection4", 8);
        c.agents.continuous_spawn = true;
        let mut w = world(&c, 1);
        // Every pocket is occupied, so nothing can spawn.
        w.vehicles[0].status = Status::Collided;
        assert!(w.respawn(&mut stream_rng(0, 1, 1)).unwrap().is_empty());
        // Once the body leaves, its pocket frees up.
        w.vehicles[0].status = Status::Reached;
        let new = w.respawn(&mut stream_rng(0, 1, 1)).unwrap();
        assert_eq!(new, vec![8]);
        assert_eq!(w.active_count(), 8);
    }

    #[test]
    fn rect_circle() {
        let r = OrientedRect::new(Pose::new(Vec2::ZERO, 0.0), VEHICLE_HALF_EXTENTS);
        assert!(rect_circle_overlap(&r, Vec2::new(2.5, 0.0), 0.4));
        assert!(!rect_circle_overlap(&r, Vec2::new(2.7, 0.0), 0.4));
    }

    #[test]
    fn pedestrians_cross_at_constant_speed() {
        let mut c = cfg("crosswalk", 1);
        c.pedestrians.enabled = true;
        let mut w = world(&c, 4);
        assert!(!w.pedestrians.is_empty() && w.pedestrians.len() <= 10);
        let before: Vec<Vec2> = w.pedestrians.iter().map(|p| p.position).collect();
        w.step(&[AgentAction { agent: 0, accel: 2, message: 0 }]).unwrap();
        for (p, b) in w.pedestrians.iter().zip(before) {
            assert_abs_diff_eq!(p.position.distance(b), PEDESTRIAN_SPEED * 0.25, epsilon = 1e-12);
        }
    }
}
