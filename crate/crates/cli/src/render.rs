//! Deterministic raster frames of a logged episode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use roadlab::geometry::{point_in_polygon, OrientedRect};
use roadlab::log::EpisodeLog;
use roadlab::world::{Phase, Status, PEDESTRIAN_RADIUS, VEHICLE_HALF_EXTENTS};
use roadlab::{MapSpec, Pose, Vec2};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const FRAME_SIZE: u32 = 800;
pub const PX_PER_M: f64 = 10.0;

pub const BACKGROUND: Rgb<u8> = Rgb([235, 235, 235]);
pub const ROAD: Rgb<u8> = Rgb([70, 70, 70]);
pub const INTERSECTION: Rgb<u8> = Rgb([95, 95, 95]);
pub const CROSSWALK: Rgb<u8> = Rgb([190, 190, 190]);
pub const GOAL: Rgb<u8> = Rgb([30, 110, 50]);
pub const PEDESTRIAN: Rgb<u8> = Rgb([250, 250, 250]);
pub const ACTIVE: Rgb<u8> = Rgb([40, 110, 230]);
pub const REACHED: Rgb<u8> = Rgb([0, 200, 120]);
/// Vehicles that collided, from the frame of the collision onward.
pub const COLLISION: Rgb<u8> = Rgb([220, 30, 30]);
pub const OFF_ROAD: Rgb<u8> = Rgb([255, 140, 0]);

pub fn status_color(s: Status) -> Rgb<u8> {
    match s {
        Status::Active => ACTIVE,
        Status::Reached => REACHED,
        Status::Collided => COLLISION,
        Status::OffRoad => OFF_ROAD,
    }
}

pub fn phase_color(p: Phase) -> Rgb<u8> {
    match p {
        Phase::Red => Rgb([230, 0, 0]),
        Phase::Yellow => Rgb([240, 200, 0]),
        Phase::Green => Rgb([0, 200, 0]),
    }
}

struct Canvas {
    img: RgbImage,
    center: Vec2,
}

impl Canvas {
    fn new(center: Vec2) -> Self {
        Canvas {
            img: RgbImage::from_pixel(FRAME_SIZE, FRAME_SIZE, BACKGROUND),
            center,
        }
    }

    fn to_world(&self, px: u32, py: u32) -> Vec2 {
        let half = FRAME_SIZE as f64 / 2.0;
        Vec2::new(
            self.center.x + (px as f64 + 0.5 - half) / PX_PER_M,
            self.center.y - (py as f64 + 0.5 - half) / PX_PER_M,
        )
    }

    /// Pixel rectangle covering the world-space box `lo..hi`.
    fn pixel_box(&self, lo: Vec2, hi: Vec2) -> (u32, u32, u32, u32) {
        let half = FRAME_SIZE as f64 / 2.0;
        let px = |x: f64| ((x - self.center.x) * PX_PER_M + half).floor();
        let py = |y: f64| (half - (y - self.center.y) * PX_PER_M).floor();
        let clamp = |v: f64| v.clamp(0.0, FRAME_SIZE as f64 - 1.0) as u32;
        (clamp(px(lo.x)), clamp(py(hi.y)), clamp(px(hi.x)), clamp(py(lo.y)))
    }

    fn fill(&mut self, lo: Vec2, hi: Vec2, color: Rgb<u8>, inside: impl Fn(Vec2) -> bool) {
        let (x0, y0, x1, y1) = self.pixel_box(lo, hi);
        for py in y0..=y1 {
            for px in x0..=x1 {
                if inside(self.to_world(px, py)) {
                    self.img.put_pixel(px, py, color);
                }
            }
        }
    }

    fn polygon(&mut self, poly: &[Vec2], color: Rgb<u8>) {
        let (lo, hi) = bounds(poly);
        self.fill(lo, hi, color, |p| point_in_polygon(p, poly));
    }

    fn rect(&mut self, pose: Pose, half_extents: Vec2, color: Rgb<u8>) {
        let r = OrientedRect::new(pose, half_extents);
        let (lo, hi) = bounds(&r.corners());
        self.fill(lo, hi, color, |p| r.contains(p));
    }

    fn disc(&mut self, c: Vec2, radius: f64, color: Rgb<u8>) {
        let d = Vec2::new(radius, radius);
        self.fill(c - d, c + d, color, |p| p.distance(c) <= radius);
    }
}

fn bounds(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

fn background(map: &MapSpec) -> Canvas {
    let (lo, hi) = map.bounds();
    let mut c = Canvas::new((lo + hi) * 0.5);
    for poly in &map.drivable_polygons {
        c.polygon(poly, ROAD);
    }
    if let Some(region) = &map.intersection_region {
        c.polygon(region, INTERSECTION);
    }
    if let Some(cw) = &map.crosswalk {
        let [a, b] = cw.segment;
        let pose = Pose::new((a + b) * 0.5, (b - a).angle());
        c.rect(pose, Vec2::new(a.distance(b) / 2.0, cw.width / 2.0), CROSSWALK);
    }
    for g in &map.goal_pockets {
        c.polygon(&g.region, GOAL);
    }
    c
}

/// Draws every frame of `log` into memory.
pub fn render_frames(log: &EpisodeLog, map: &MapSpec) -> Vec<RgbImage> {
    let base = background(map);
    let n = log.n_ticks();
    let signals: BTreeMap<u32, &Vec<Phase>> = log.signals.iter().map(|s| (s.tick, &s.phases)).collect();
    let mut peds: BTreeMap<u32, Vec<Vec2>> = BTreeMap::new();
    for p in log.pedestrians.iter().filter(|p| p.active) {
        peds.entry(p.tick).or_default().push(p.position);
    }
    (0..n)
        .map(|t| {
            let mut c = Canvas {
                img: base.img.clone(),
                center: base.center,
            };
            if let Some(phases) = signals.get(&t) {
                for s in &map.signals {
                    if let Some(&p) = phases.get(s.road) {
                        c.rect(Pose::new(s.position, s.heading), Vec2::new(0.8, 0.8), phase_color(p));
                    }
                }
            }
            for &p in peds.get(&t).into_iter().flatten() {
                c.disc(p, PEDESTRIAN_RADIUS, PEDESTRIAN);
            }
            for a in &log.agents {
                let (Some(first), Some(last)) = (a.samples.first(), a.samples.last()) else { continue };
                if t < first.tick {
                    continue;
                }
                if let Some(s) = a.samples.iter().find(|s| s.tick == t) {
                    c.rect(s.pose, VEHICLE_HALF_EXTENTS, status_color(s.status));
                } else if t > last.tick && a.summary.status.is_body() && a.summary.status != Status::Active {
                    // Halted bodies stay where they stopped.
                    c.rect(a.summary.end_pose, VEHICLE_HALF_EXTENTS, status_color(a.summary.status));
                }
            }
            c.img
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FrameIndex {
    episode: u64,
    frames: u32,
    fps: f64,
    width: u32,
    height: u32,
    px_per_m: f64,
}

/// Writes `frame_00000.png`, … for episode `episode_index` of the log. An
/// empty log yields no frames.
pub fn cmd_render(log_path: &Path, out_dir: &Path, episode_index: usize, fps: f64, map_override: Option<&str>) -> CliResult<Vec<PathBuf>> {
    let logs = EpisodeLog::read_path(log_path).map_err(|e| CliError::Runtime(format!("{}: {e}", log_path.display())))?;
    std::fs::create_dir_all(out_dir)?;
    let Some(log) = logs.get(episode_index) else {
        if logs.is_empty() {
            return Ok(Vec::new());
        }
        return Err(CliError::Runtime(format!("log has {} episodes, no index {episode_index}", logs.len())));
    };
    let map_name = map_override.unwrap_or(&log.header.map);
    let map = MapSpec::resolve(map_name).map_err(|e| CliError::Runtime(format!("cannot load map `{map_name}`: {e}")))?;
    let frames = render_frames(log, &map);
    let mut paths = Vec::with_capacity(frames.len());
    for (i, img) in frames.iter().enumerate() {
        let p = out_dir.join(format!("frame_{i:05}.png"));
        img.save(&p).map_err(CliError::runtime)?;
        paths.push(p);
    }
    let index = FrameIndex {
        episode: log.header.episode,
        frames: frames.len() as u32,
        fps,
        width: FRAME_SIZE,
        height: FRAME_SIZE,
        px_per_m: PX_PER_M,
    };
    std::fs::write(out_dir.join("frames.json"), serde_json::to_string_pretty(&index).map_err(CliError::runtime)?)?;
    Ok(paths)
}
