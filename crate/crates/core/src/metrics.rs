//! Traffic-convention statistics computed from trajectory logs.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Vec2};
use crate::log::{AgentSample, EpisodeLog};
use crate::map::MapSpec;
use crate::sensing::{signal_code, SIGNAL_NONE};
use crate::world::{Phase, NUM_ACCELS, VEHICLE_HALF_EXTENTS};

/// Edge length of spatial histogram cells (m).
pub const SPATIAL_BIN: f64 = 2.0;
/// Bearing cone for picking a leading vehicle.
pub const LEADER_CONE: f64 = 15.0 * std::f64::consts::PI / 180.0;
pub const LEADER_RANGE: f64 = 50.0;
pub const HEADING_BINS: usize = 8;
/// Fraction of each agent's samples treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.25;

/// Plug-in mutual information in bits of paired categorical samples.
pub fn mutual_information(pairs: &[(usize, usize)], nx: usize, ny: usize) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut joint = vec![0.0; nx * ny];
    for &(x, y) in pairs {
        joint[x * ny + y] += 1.0;
    }
    let n = pairs.len() as f64;
    let px: Vec<f64> = (0..nx).map(|x| (0..ny).map(|y| joint[x * ny + y]).sum::<f64>() / n).collect();
    let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| joint[x * ny + y]).sum::<f64>() / n).collect();
    let mut mi = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let p = joint[x * ny + y] / n;
            if p > 0.0 {
                mi += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Pearson correlation; `None` when either variable is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Gap a follower needs to shed a closing speed `dv` at deceleration `a_max`.
pub fn required_gap(dv: f64, a_max: f64) -> f64 {
    dv.max(0.0).powi(2) / (2.0 * a_max)
}

fn cell(p: Vec2) -> (i64, i64) {
    ((p.x / SPATIAL_BIN).floor() as i64, (p.y / SPATIAL_BIN).floor() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialBin {
    /// Lower-left corner of the cell (m).
    pub x: f64,
    pub y: f64,
    pub samples: usize,
    pub green_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalCompliance {
    /// Fraction of intersection entries made on green.
    pub fraction: f64,
    pub entries: usize,
    /// Entries made without any signal in view beforehand (not counted).
    pub unobserved: usize,
    pub histogram: Vec<SpatialBin>,
}

fn require_intersection(map: &MapSpec, metric: &'static str) -> Result<()> {
    if map.intersection_region.is_none() {
        return Err(Error::Inapplicable {
            metric,
            reason: format!("map `{}` has no intersection region", map.name),
        });
    }
    Ok(())
}

/// For every agent that enters the intersection, the last signal code it saw
/// before entering decides whether the entry was on green. The histogram
/// labels each pre-entry position with that outcome.
pub fn signal_compliance(logs: &[EpisodeLog], map: &MapSpec) -> Result<SignalCompliance> {
    require_intersection(map, "signal_compliance")?;
    let green = signal_code(Phase::Green);
    let (mut entries, mut on_green, mut unobserved) = (0, 0, 0);
    let mut cells: BTreeMap<(i64, i64), (usize, usize)> = BTreeMap::new();
    for log in logs {
        for a in &log.agents {
            let Some(arrival) = a.summary.arrival_tick else { continue };
            if arrival <= a.summary.spawn_tick {
                continue;
            }
            let before: Vec<&AgentSample> = a.samples.iter().filter(|s| s.tick < arrival).collect();
            let Some(seen) = before.iter().rev().find(|s| s.signal_code != SIGNAL_NONE) else {
                unobserved += 1;
                continue;
            };
            entries += 1;
            let is_green = seen.signal_code == green;
            on_green += is_green as usize;
            for s in &before {
                let c = cells.entry(cell(s.pose.position)).or_default();
                c.0 += 1;
                c.1 += is_green as usize;
            }
        }
    }
    Ok(SignalCompliance {
        fraction: if entries > 0 { on_green as f64 / entries as f64 } else { 0.0 },
        entries,
        unobserved,
        histogram: cells
            .into_iter()
            .map(|((i, j), (n, g))| SpatialBin {
                x: i as f64 * SPATIAL_BIN,
                y: j as f64 * SPATIAL_BIN,
                samples: n,
                green_fraction: g as f64 / n as f64,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaneSample {
    pub episode: u64,
    pub agent: usize,
    pub tick: u32,
    pub road: usize,
    /// Lateral offset over half the road width, positive right of travel.
    pub value: f64,
    pub on_road: bool,
}

/// Signed, normalized lateral offset of `position` moving along `heading`
/// relative to the nearest road axis: positive on the right of travel.
pub fn lane_position(map: &MapSpec, position: Vec2, heading: f64) -> Result<(usize, f64)> {
    let (road, lateral_left, axis) = map.nearest_road(position).ok_or_else(|| Error::Inapplicable {
        metric: "lane_position",
        reason: "map has no roads".into(),
    })?;
    let width = map.road(road).width.ok_or_else(|| Error::Inapplicable {
        metric: "lane_position",
        reason: format!("road {road} has no width"),
    })?;
    let along = Vec2::from_angle(heading).dot(axis) >= 0.0;
    let right = if along { -lateral_left } else { lateral_left };
    Ok((road, right / (width / 2.0)))
}

pub fn lane_position_series(logs: &[EpisodeLog], map: &MapSpec) -> Result<Vec<LaneSample>> {
    let mut out = Vec::new();
    for log in logs {
        for a in &log.agents {
            for s in &a.samples {
                let (road, value) = lane_position(map, s.pose.position, s.pose.heading)?;
                out.push(LaneSample {
                    episode: log.header.episode,
                    agent: a.summary.agent,
                    tick: s.tick,
                    road,
                    value,
                    on_road: value.abs() <= 1.0 && map.is_drivable(s.pose.position),
                });
            }
        }
    }
    Ok(out)
}

/// Density of on-road lane positions over `bins` equal cells of [−1, 1].
pub fn lane_density(samples: &[LaneSample], bins: usize) -> Vec<f64> {
    let on: Vec<f64> = samples.iter().filter(|s| s.on_road).map(|s| s.value).collect();
    let mut h = vec![0.0; bins];
    for v in &on {
        let i = (((v + 1.0) / 2.0 * bins as f64).floor() as usize).min(bins - 1);
        h[i] += 1.0;
    }
    let width = 2.0 / bins as f64;
    let n = on.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n * width);
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RightOfWay {
    /// Fraction of ordered arrival pairs (over all episodes) that left in
    /// arrival order.
    pub per_pair: f64,
    pub pairs: usize,
    /// Mean and standard deviation of the per-episode fractions, over
    /// episodes with at least one pair.
    pub per_episode_mean: f64,
    pub per_episode_std: f64,
    pub episodes: usize,
}

/// First-in-first-out score: for agents `i`, `j` with `arrival_i < arrival_j`,
/// the pair is respected unless `i` departs after `j`. Agents that never
/// depart are excluded.
pub fn right_of_way_score(logs: &[EpisodeLog]) -> RightOfWay {
    let (mut pairs, mut kept) = (0usize, 0usize);
    let mut per_episode = Vec::new();
    for log in logs {
        let times: Vec<(u32, u32)> = log
            .agents
            .iter()
            .filter_map(|a| Some((a.summary.arrival_tick?, a.summary.departure_tick?)))
            .collect();
        let (mut p, mut k) = (0usize, 0usize);
        for &(ai, di) in &times {
            for &(aj, dj) in &times {
                if ai < aj {
                    p += 1;
                    k += (di <= dj) as usize;
                }
            }
        }
        if p > 0 {
            per_episode.push(k as f64 / p as f64);
        }
        pairs += p;
        kept += k;
    }
    let m = per_episode.len().max(1) as f64;
    let mean = per_episode.iter().sum::<f64>() / m;
    let var = per_episode.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    RightOfWay {
        per_pair: if pairs > 0 { kept as f64 / pairs as f64 } else { 0.0 },
        pairs,
        per_episode_mean: mean,
        per_episode_std: var.sqrt(),
        episodes: per_episode.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerConsistency {
    /// Mutual information (bits) between a message and the next acceleration.
    pub mi_action_bits: f64,
    /// Mutual information (bits) between a message and the next heading bin.
    pub mi_heading_bits: f64,
    pub pearson_heading: f64,
    pub pearson_heading_change: f64,
    /// True when a correlation was undefined (constant message or heading)
    /// and reported as 0.
    pub degenerate: bool,
    pub samples: usize,
}

fn heading_bin(h: f64) -> usize {
    let u = (normalize_angle(h) + std::f64::consts::PI) / std::f64::consts::TAU;
    ((u * HEADING_BINS as f64).floor() as usize).min(HEADING_BINS - 1)
}

/// Pairs each broadcast message with the same agent's action on the next tick.
pub fn speaker_consistency(logs: &[EpisodeLog]) -> Result<SpeakerConsistency> {
    if logs.iter().any(|l| !l.header.comm_enabled) {
        return Err(Error::Inapplicable {
            metric: "speaker_consistency",
            reason: "logs recorded without the message channel".into(),
        });
    }
    let mut act = Vec::new();
    let mut head = Vec::new();
    let (mut msg, mut heading, mut change) = (Vec::new(), Vec::new(), Vec::new());
    for log in logs {
        for a in &log.agents {
            for w in a.samples.windows(2) {
                if w[1].tick != w[0].tick + 1 {
                    continue;
                }
                let m = w[0].message as usize;
                act.push((m, w[1].accel));
                head.push((m, heading_bin(w[1].pose.heading)));
                msg.push(m as f64);
                heading.push(w[1].pose.heading);
                change.push(normalize_angle(w[1].pose.heading - w[0].pose.heading));
            }
        }
    }
    let ph = pearson(&heading, &msg);
    let pc = pearson(&change, &msg);
    Ok(SpeakerConsistency {
        mi_action_bits: mutual_information(&act, 2, NUM_ACCELS),
        mi_heading_bits: mutual_information(&head, 2, HEADING_BINS),
        pearson_heading: ph.unwrap_or(0.0),
        pearson_heading_change: pc.unwrap_or(0.0),
        degenerate: ph.is_none() || pc.is_none(),
        samples: act.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSample {
    pub gap: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyDistance {
    pub adherence: f64,
    pub samples: Vec<GapSample>,
}

/// For every follower with a leader (nearest vehicle within ±15° and 50 m on
/// the same road), compares the bumper-to-bumper gap with the gap needed to
/// match the leader's speed at `a_max`.
pub fn safety_distance_stats(logs: &[EpisodeLog], map: &MapSpec, a_max: f64) -> SafetyDistance {
    let mut samples = Vec::new();
    for log in logs {
        let mut by_tick: BTreeMap<u32, Vec<&AgentSample>> = BTreeMap::new();
        for a in &log.agents {
            for s in &a.samples {
                by_tick.entry(s.tick).or_default().push(s);
            }
        }
        for group in by_tick.values() {
            let roads: Vec<Option<usize>> = group.iter().map(|s| map.nearest_road(s.pose.position).map(|r| r.0)).collect();
            for (i, f) in group.iter().enumerate() {
                let leader = group
                    .iter()
                    .enumerate()
                    .filter(|&(j, l)| {
                        j != i
                            && roads[j] == roads[i]
                            && f.pose.position.distance(l.pose.position) <= LEADER_RANGE
                            && f.pose.bearing_to(l.pose.position).abs() <= LEADER_CONE
                    })
                    .min_by(|a, b| {
                        let da = f.pose.position.distance(a.1.pose.position);
                        let db = f.pose.position.distance(b.1.pose.position);
                        da.total_cmp(&db)
                    });
                if let Some((_, l)) = leader {
                    let gap = (f.pose.position.distance(l.pose.position) - 2.0 * VEHICLE_HALF_EXTENTS.x).max(0.0);
                    samples.push(GapSample {
                        gap,
                        required: required_gap(f.speed - l.speed, a_max),
                    });
                }
            }
        }
    }
    let ok = samples.iter().filter(|s| s.gap >= s.required).count();
    SafetyDistance {
        adherence: if samples.is_empty() { 1.0 } else { ok as f64 / samples.len() as f64 },
        samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosswalkStats {
    /// Fraction of samples whose distance to the nearest pedestrian exceeds
    /// the stopping distance.
    pub safe_fraction: f64,
    /// (distance to nearest active pedestrian, stopping distance) per sample.
    pub samples: Vec<GapSample>,
}

pub fn crosswalk_stats(logs: &[EpisodeLog], a_max: f64) -> Result<CrosswalkStats> {
    if logs.iter().all(|l| l.pedestrians.is_empty()) {
        return Err(Error::Inapplicable {
            metric: "crosswalk_stats",
            reason: "logs contain no pedestrians".into(),
        });
    }
    let mut samples = Vec::new();
    for log in logs {
        let mut peds: BTreeMap<u32, Vec<Vec2>> = BTreeMap::new();
        for p in log.pedestrians.iter().filter(|p| p.active) {
            peds.entry(p.tick).or_default().push(p.position);
        }
        for a in &log.agents {
            for s in &a.samples {
                let Some(ps) = peds.get(&s.tick) else { continue };
                let d = ps.iter().map(|p| p.distance(s.pose.position)).fold(f64::INFINITY, f64::min);
                samples.push(GapSample {
                    gap: d,
                    required: required_gap(s.speed, a_max),
                });
            }
        }
    }
    let ok = samples.iter().filter(|s| s.gap >= s.required).count();
    Ok(CrosswalkStats {
        safe_fraction: if samples.is_empty() { 1.0 } else { ok as f64 / samples.len() as f64 },
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastLane {
    /// Pearson correlation between rating and steady-state lane position;
    /// positive means faster agents keep further right.
    pub correlation: Option<f64>,
    pub ratings: Vec<f64>,
    pub positions: Vec<f64>,
}

/// Correlates each agent's rating with its mean lane position over the last
/// quarter of its own samples.
pub fn fast_lane_segregation(logs: &[EpisodeLog], map: &MapSpec) -> Result<FastLane> {
    let (mut ratings, mut positions) = (Vec::new(), Vec::new());
    for log in logs {
        for a in &log.agents {
            let n = a.samples.len();
            if n == 0 {
                continue;
            }
            let start = n - ((n as f64 * STEADY_STATE_FRACTION).ceil() as usize).clamp(1, n);
            let mut sum = 0.0;
            for s in &a.samples[start..] {
                sum += lane_position(map, s.pose.position, s.pose.heading)?.1;
            }
            ratings.push(a.summary.rating);
            positions.push(sum / (n - start) as f64);
        }
    }
    Ok(FastLane {
        correlation: pearson(&ratings, &positions),
        ratings,
        positions,
    })
}
