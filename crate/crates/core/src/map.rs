//! Map description: drivable area, road axes, signals and spawn/goal pockets.
//!
//! Maps are stored as versioned JSON (see `docs/map-schema.md`). Three maps are
//! bundled: `intersection4`, `highway` and `crosswalk`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, point_segment_distance, Segment, Vec2};

pub const MAP_SCHEMA_VERSION: u32 = 1;

pub type Polygon = Vec<Vec2>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: usize,
    /// Centerline polyline, pointing from the outer end inward.
    pub axis: Vec<Vec2>,
    /// Paved width. Roads without one cannot host spline deviations.
    #[serde(default)]
    pub width: Option<f64>,
    /// Fixed-track lane offset to the right of travel.
    #[serde(default)]
    pub lane_offset: f64,
    /// Approaches sharing a group share a signal phase.
    #[serde(default)]
    pub signal_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crosswalk {
    pub segment: [Vec2; 2],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlacement {
    pub position: Vec2,
    /// Direction the signal face points (towards approaching traffic).
    pub heading: f64,
    /// Approach road this signal controls.
    pub road: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnPocket {
    pub region: Polygon,
    /// Nominal spawn point inside `region`.
    pub anchor: Vec2,
    pub heading: f64,
    pub road: usize,
    /// Lower tiers are filled first.
    #[serde(default)]
    pub tier: u32,
    /// Uniform longitudinal jitter (± meters) applied to the anchor.
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPocket {
    pub region: Polygon,
    pub anchor: Vec2,
    pub road: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub version: u32,
    pub name: String,
    pub drivable_polygons: Vec<Polygon>,
    pub roads: Vec<Road>,
    pub intersection_region: Option<Polygon>,
    pub crosswalk: Option<Crosswalk>,
    pub signals: Vec<SignalPlacement>,
    pub spawn_pockets: Vec<SpawnPocket>,
    pub goal_pockets: Vec<GoalPocket>,
}

const INTERSECTION4: &str = include_str!("../maps/intersection4.json");
const HIGHWAY: &str = include_str!("../maps/highway.json");
const CROSSWALK: &str = include_str!("../maps/crosswalk.json");

pub const BUNDLED_MAPS: [&str; 3] = ["intersection4", "highway", "crosswalk"];

impl MapSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let map: MapSpec = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = match name {
            "intersection4" => INTERSECTION4,
            "highway" => HIGHWAY,
            "crosswalk" => CROSSWALK,
            _ => return Err(Error::config("map.name", format!("no bundled map named `{name}`"))),
        };
        Self::from_json(text)
    }

    /// Resolves a bundled map name or a path to a JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if BUNDLED_MAPS.contains(&name_or_path) {
            Self::bundled(name_or_path)
        } else {
            Self::load(Path::new(name_or_path))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MAP_SCHEMA_VERSION {
            return Err(Error::config(
                "map.version",
                format!("unsupported map schema version {}", self.version),
            ));
        }
        for (i, poly) in self.drivable_polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::config(format!("map.drivable_polygons[{i}]"), "needs 3 vertices"));
            }
        }
        for (i, road) in self.roads.iter().enumerate() {
            if road.id != i {
                return Err(Error::config(format!("map.roads[{i}].id"), "road ids must be 0..n in order"));
            }
            if road.axis.len() < 2 {
                return Err(Error::config(format!("map.roads[{i}].axis"), "needs at least 2 points"));
            }
            if road.width.is_some_and(|w| w <= 0.0) {
                return Err(Error::config(format!("map.roads[{i}].width"), "must be positive"));
            }
        }
        let has_road = |r: usize| r < self.roads.len();
        for (i, s) in self.signals.iter().enumerate() {
            if !has_road(s.road) {
                return Err(Error::config(format!("map.signals[{i}].road"), "references a missing road"));
            }
        }
        for (i, p) in self.spawn_pockets.iter().enumerate() {
            if !has_road(p.road) {
                return Err(Error::config(format!("map.spawn_pockets[{i}].road"), "references a missing road"));
            }
            if !p.region.iter().chain(std::iter::once(&p.anchor)).all(|&v| self.is_drivable(v)) {
                return Err(Error::config(format!("map.spawn_pockets[{i}].region"), "lies outside the drivable area"));
            }
        }
        for (i, p) in self.goal_pockets.iter().enumerate() {
            if !has_road(p.road) {
                return Err(Error::config(format!("map.goal_pockets[{i}].road"), "references a missing road"));
            }
            if !p.region.iter().chain(std::iter::once(&p.anchor)).all(|&v| self.is_drivable(v)) {
                return Err(Error::config(format!("map.goal_pockets[{i}].region"), "lies outside the drivable area"));
            }
        }
        if self.spawn_pockets.is_empty() || self.goal_pockets.is_empty() {
            return Err(Error::config("map.spawn_pockets", "map needs spawn and goal pockets"));
        }
        Ok(())
    }

    /// Inside (or on the boundary of) the union of drivable polygons.
    pub fn is_drivable(&self, p: Vec2) -> bool {
        self.drivable_polygons
            .iter()
            .any(|poly| point_in_polygon(p, poly) || on_boundary(p, poly))
    }

    /// Edges of every drivable polygon, used as LiDAR walls.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        self.drivable_polygons
            .iter()
            .flat_map(|poly| {
                (0..poly.len()).filter_map(move |i| Segment::new(poly[i], poly[(i + 1) % poly.len()]).ok())
            })
            .collect()
    }

    /// Axis-aligned bounds `(min, max)` of the drivable area.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.drivable_polygons.iter().flatten() {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// True when every road has a width, which the spline model needs to lay
    /// out lateral deviations.
    pub fn supports_splines(&self) -> bool {
        self.roads.iter().all(|r| r.width.is_some())
    }

    /// Nearest road to `p` with the signed lateral offset from its axis
    /// (positive to the left of the axis direction) and the local axis direction.
    pub fn nearest_road(&self, p: Vec2) -> Option<(usize, f64, Vec2)> {
        let mut best: Option<(f64, usize, f64, Vec2)> = None;
        for road in &self.roads {
            for w in road.axis.windows(2) {
                let d = point_segment_distance(p, w[0], w[1]);
                if best.as_ref().is_none_or(|b| d < b.0) {
                    let dir = (w[1] - w[0]).normalized();
                    let lateral = dir.cross(p - w[0]);
                    best = Some((d, road.id, lateral, dir));
                }
            }
        }
        best.map(|(_, id, lat, dir)| (id, lat, dir))
    }

    pub fn road(&self, id: usize) -> &Road {
        &self.roads[id]
    }
}

fn on_boundary(p: Vec2, poly: &[Vec2]) -> bool {
    (0..poly.len()).any(|i| point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]) < 1e-9)
}

/// Polyline offset sideways by `offset` meters (positive = right of travel),
/// with mitred joints.
pub fn offset_polyline(points: &[Vec2], offset: f64) -> Vec<Vec2> {
    let n = points.len();
    let right = |a: Vec2, b: Vec2| -(b - a).normalized().perp();
    (0..n)
        .map(|i| {
            let p = points[i];
            if i == 0 {
                p + right(points[0], points[1]) * offset
            } else if i == n - 1 {
                p + right(points[n - 2], points[n - 1]) * offset
            } else {
                let r0 = right(points[i - 1], p);
                let r1 = right(p, points[i + 1]);
                let bis = (r0 + r1).normalized();
                let cos = bis.dot(r0);
                if cos.abs() < 1e-6 {
                    p + r0 * offset
                } else {
                    p + bis * (offset / cos)
                }
            }
        })
        .collect()
}

/// Drops interior points that are collinear with their neighbours.
pub fn simplify_collinear(points: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() == Some(&p) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            if (b - a).cross(p - b).abs() < 1e-9 && (b - a).dot(p - b) > 0.0 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point and unit direction at arc length `d` along a polyline.
pub fn polyline_point(points: &[Vec2], d: f64) -> (Vec2, Vec2) {
    let mut remaining = d.max(0.0);
    let last = points.len().saturating_sub(2);
    for (i, w) in points.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        if remaining <= len || i == last {
            let dir = (w[1] - w[0]).normalized();
            return (w[0] + dir * remaining.min(len), dir);
        }
        remaining -= len;
    }
    (points[0], Vec2::ZERO)
}

/// Route centerline from a spawn pocket to a goal pocket following the road
/// axes through the map's junction point (if the roads differ).
pub fn route_centerline(map: &MapSpec, spawn: Vec2, spawn_road: usize, goal: Vec2, goal_road: usize) -> Vec<Vec2> {
    let project = |p: Vec2, road: &Road| -> Vec2 {
        let mut best = (f64::INFINITY, p);
        for w in road.axis.windows(2) {
            let e = w[1] - w[0];
            let t = ((p - w[0]).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
            let q = w[0] + e * t;
            let d = q.distance(p);
            if d < best.0 {
                best = (d, q);
            }
        }
        best.1
    };
    let start = project(spawn, map.road(spawn_road));
    let end = project(goal, map.road(goal_road));
    let mut pts = vec![start];
    if spawn_road != goal_road {
        // Roads meet at the inner end of their axes.
        pts.push(*map.road(spawn_road).axis.last().unwrap());
    }
    pts.push(end);
    simplify_collinear(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_maps_validate() {
        for name in BUNDLED_MAPS {
            let m = MapSpec::bundled(name).unwrap();
            assert_eq!(m.name, name);
        }
        assert!(MapSpec::bundled("nope").is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = MapSpec::bundled("intersection4").unwrap();
        let back = MapSpec::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn signal_must_reference_road() {
        let mut m = MapSpec::bundled("intersection4").unwrap();
        m.signals[0].road = 17;
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("map.signals[0].road"), "{err}");
    }

    #[test]
    fn spline_capability_needs_widths() {
        let mut m = MapSpec::bundled("intersection4").unwrap();
        assert!(m.supports_splines());
        m.roads[1].width = None;
        m.validate().unwrap();
        assert!(!m.supports_splines());
    }

    #[test]
    fn pocket_outside_drivable_rejected() {
        let mut m = MapSpec::bundled("highway").unwrap();
        m.spawn_pockets[0].anchor = Vec2::new(0.0, 30.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn intersection_drivable_shape() {
        let m = MapSpec::bundled("intersection4").unwrap();
        assert!(m.is_drivable(Vec2::new(0.0, 0.0)));
        assert!(m.is_drivable(Vec2::new(30.0, 5.0)));
        assert!(!m.is_drivable(Vec2::new(20.0, 20.0)));
        assert_eq!(m.boundary_segments().len(), 12);
    }

    #[test]
    fn straight_route_through_center() {
        let m = MapSpec::bundled("intersection4").unwrap();
        let r = route_centerline(&m, Vec2::new(22.0, 3.0), 0, Vec2::new(-35.0, 0.0), 2);
        assert_eq!(r, vec![Vec2::new(22.0, 0.0), Vec2::new(-35.0, 0.0)]);
        let lane = offset_polyline(&r, 3.0);
        // Westbound traffic keeps right, i.e. north of the axis.
        assert_eq!(lane[0], Vec2::new(22.0, 3.0));
        assert_eq!(lane[1], Vec2::new(-35.0, 3.0));
    }

    #[test]
    fn turning_route_offset_is_mitred() {
        let pts = [Vec2::new(20.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(0.0, 20.0)];
        let lane = offset_polyline(&pts, 3.0);
        assert!(lane[1].distance(Vec2::new(3.0, 3.0)) < 1e-12);
    }
}
