//! Planar primitives, ray casting, oriented-rectangle overlap and centripetal
//! Catmull-Rom splines with arc-length lookup.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to accept single-point contacts of collinear rays.
const COLLINEAR_EPS: f64 = 1e-9;

/// Arc-length table spacing in meters.
pub const ARC_TABLE_RESOLUTION: f64 = 0.1;

/// Centripetal knot exponent.
pub const CENTRIPETAL_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_angle(heading: f64) -> Self {
        Vec2::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading: normalize_angle(heading),
        }
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// Bearing of `target` relative to the heading, in (-π, π].
    pub fn bearing_to(&self, target: Vec2) -> f64 {
        normalize_angle((target - self.position).angle() - self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self> {
        if a == b {
            return Err(Error::Domain("segment endpoints coincide".into()));
        }
        Ok(Segment { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }
}

/// Distance along the ray `origin + t·dir` (|dir| = 1) to `seg`, if hit.
fn ray_segment_hit(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    let w = seg.a - origin;
    if denom.abs() <= f64::EPSILON * e.norm() {
        // Parallel. Only a collinear single-point touch counts.
        if w.cross(dir).abs() > COLLINEAR_EPS {
            return None;
        }
        let ta = w.dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        if (hi - lo).abs() <= COLLINEAR_EPS && lo >= 0.0 {
            return Some(lo);
        }
        return None;
    }
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray to a disc of `radius` centred at `center`, if hit.
pub fn ray_circle_hit(origin: Vec2, direction: f64, center: Vec2, radius: f64) -> Option<f64> {
    let d = Vec2::from_angle(direction);
    let m = origin - center;
    let b = m.dot(d);
    let c = m.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}

/// Distance from `origin` along `direction` to the nearest segment, capped at
/// `max_range`. A miss returns `max_range`.
pub fn ray_cast(origin: Vec2, direction: f64, obstacles: &[Segment], max_range: f64) -> f64 {
    let dir = Vec2::from_angle(direction);
    obstacles
        .iter()
        .filter_map(|s| ray_segment_hit(origin, dir, s))
        .fold(max_range, f64::min)
}

/// Oriented rectangle: centre pose plus half-extents along (heading, left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub pose: Pose,
    pub half_extents: Vec2,
}

impl OrientedRect {
    pub fn new(pose: Pose, half_extents: Vec2) -> Self {
        OrientedRect { pose, half_extents }
    }

    fn axes(&self) -> [Vec2; 2] {
        let f = self.pose.forward();
        [f, f.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [f, l] = self.axes();
        let c = self.pose.position;
        let fx = f * self.half_extents.x;
        let ly = l * self.half_extents.y;
        [c + fx + ly, c - fx + ly, c - fx - ly, c + fx - ly]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        std::array::from_fn(|i| Segment {
            a: c[i],
            b: c[(i + 1) % 4],
        })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let [f, l] = self.axes();
        let d = p - self.pose.position;
        d.dot(f).abs() <= self.half_extents.x && d.dot(l).abs() <= self.half_extents.y
    }
}

fn project(points: &[Vec2], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let v = p.dot(axis);
        (lo.min(v), hi.max(v))
    })
}

fn edge_normals(poly: &[Vec2]) -> impl Iterator<Item = Vec2> + '_ {
    (0..poly.len()).map(move |i| (poly[(i + 1) % poly.len()] - poly[i]).perp())
}

/// Separating-axis test for two convex polygons. Touching counts as overlap.
pub fn convex_overlap(a: &[Vec2], b: &[Vec2]) -> bool {
    for axis in edge_normals(a).chain(edge_normals(b)) {
        if axis.norm_sq() == 0.0 {
            continue;
        }
        let (amin, amax) = project(a, axis);
        let (bmin, bmax) = project(b, axis);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

/// True iff the oriented rectangles intersect.
pub fn rect_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    convex_overlap(&a.corners(), &b.corners())
}

/// Crossing-number point-in-polygon test (polygon may be non-convex).
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the closest point of a polygon's boundary.
pub fn distance_to_polygon_boundary(p: Vec2, poly: &[Vec2]) -> f64 {
    (0..poly.len())
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let t = if e.norm_sq() > 0.0 {
        ((p - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + e * t)
}

/// Cubic in Hermite-derived power basis for one spline span, parameterised by
/// the local fraction `s ∈ [0, 1]` of the span's knot interval.
#[derive(Debug, Clone, Copy)]
struct SpanPoly {
    c0: Vec2,
    c1: Vec2,
    c2: Vec2,
    c3: Vec2,
}

impl SpanPoly {
    fn eval(&self, s: f64) -> Vec2 {
        self.c0 + (self.c1 + (self.c2 + self.c3 * s) * s) * s
    }

    fn derivative(&self, s: f64) -> Vec2 {
        self.c1 + (self.c2 * 2.0 + self.c3 * (3.0 * s)) * s
    }
}

/// Difference quotient with the 0/0 limit of coincident points taken as zero.
fn slope(p0: Vec2, p1: Vec2, t0: f64, t1: f64) -> Vec2 {
    let dt = t1 - t0;
    if dt > 0.0 {
        (p1 - p0) * (1.0 / dt)
    } else {
        Vec2::ZERO
    }
}

/// Centripetal Catmull-Rom spline. The evaluable domain is the interior span
/// `[knot_1, knot_{n-2}]`, running from `control_points[1]` to
/// `control_points[n-2]`.
#[derive(Debug, Clone)]
pub struct Spline {
    control_points: Vec<Vec2>,
    knots: Vec<f64>,
    spans: Vec<SpanPoly>,
    /// (parameter, cumulative arc length), strictly increasing in length.
    arc_table: Vec<(f64, f64)>,
}

/// Result of an arc-length lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint {
    pub position: Vec2,
    pub heading: f64,
    /// True when the requested distance fell outside `[0, L]`.
    pub clamped: bool,
}

impl Spline {
    /// Builds a spline from at least four control points. The first and last
    /// points only shape the end tangents.
    pub fn new(control_points: Vec<Vec2>) -> Result<Self> {
        if control_points.len() < 4 {
            return Err(Error::Domain(format!(
                "spline needs at least 4 control points, got {}",
                control_points.len()
            )));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite spline control point".into()));
        }
        let mut knots = Vec::with_capacity(control_points.len());
        knots.push(0.0);
        for w in control_points.windows(2) {
            let prev = *knots.last().unwrap();
            knots.push(prev + w[0].distance(w[1]).powf(CENTRIPETAL_ALPHA));
        }
        let n = control_points.len();
        if knots[n - 2] <= knots[1] {
            return Err(Error::Domain("spline interior span has zero length".into()));
        }
        let spans = (1..n - 2)
            .map(|i| {
                let (p0, p1, p2, p3) = (
                    control_points[i - 1],
                    control_points[i],
                    control_points[i + 1],
                    control_points[i + 2],
                );
                let (t0, t1, t2, t3) = (knots[i - 1], knots[i], knots[i + 1], knots[i + 2]);
                let h = t2 - t1;
                // Non-uniform Catmull-Rom tangents scaled to the unit span.
                let m1 = (slope(p0, p1, t0, t1) - slope(p0, p2, t0, t2) + slope(p1, p2, t1, t2)) * h;
                let m2 = (slope(p1, p2, t1, t2) - slope(p1, p3, t1, t3) + slope(p2, p3, t2, t3)) * h;
                SpanPoly {
                    c0: p1,
                    c1: m1,
                    c2: (p2 - p1) * 3.0 - m1 * 2.0 - m2,
                    c3: (p1 - p2) * 2.0 + m1 + m2,
                }
            })
            .collect();
        let mut spline = Spline {
            control_points,
            knots,
            spans,
            arc_table: Vec::new(),
        };
        spline.arc_table = spline.build_arc_table();
        Ok(spline)
    }

    /// Spline through `points` (at least two), with the end points duplicated
    /// so the whole path is evaluable. Consecutive duplicates are dropped.
    pub fn through(points: &[Vec2]) -> Result<Self> {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len() + 2);
        for &p in points {
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return Err(Error::Domain("path needs two distinct points".into()));
        }
        let first = pts[0];
        let last = *pts.last().unwrap();
        pts.insert(0, first);
        pts.push(last);
        Spline::new(pts)
    }

    pub fn control_points(&self) -> &[Vec2] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn arc_table(&self) -> &[(f64, f64)] {
        &self.arc_table
    }

    /// Interior parameter domain.
    pub fn domain(&self) -> (f64, f64) {
        let n = self.knots.len();
        (self.knots[1], self.knots[n - 2])
    }

    pub fn length(&self) -> f64 {
        self.arc_table.last().map_or(0.0, |e| e.1)
    }

    pub fn start(&self) -> Vec2 {
        self.control_points[1]
    }

    pub fn end(&self) -> Vec2 {
        self.control_points[self.control_points.len() - 2]
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        // Span j covers knots[j+1]..knots[j+2]; skip zero-width spans.
        let n = self.knots.len();
        let mut j = match self.knots[1..n - 1].partition_point(|&k| k <= u) {
            0 => 0,
            k => (k - 1).min(self.spans.len() - 1),
        };
        while self.knots[j + 2] - self.knots[j + 1] <= 0.0 && j > 0 {
            j -= 1;
        }
        let (a, b) = (self.knots[j + 1], self.knots[j + 2]);
        let s = if b > a { ((u - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        (j, s)
    }

    fn eval_unchecked(&self, u: f64) -> Vec2 {
        let (j, s) = self.locate(u);
        self.spans[j].eval(s)
    }

    /// Point at knot parameter `u`.
    pub fn eval(&self, u: f64) -> Result<Vec2> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&u) {
            return Err(Error::Domain(format!(
                "spline parameter {u} outside [{lo}, {hi}]"
            )));
        }
        Ok(self.eval_unchecked(u))
    }

    /// Derivative with respect to the knot parameter.
    pub fn derivative(&self, u: f64) -> Result<Vec2> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&u) {
            return Err(Error::Domain(format!(
                "spline parameter {u} outside [{lo}, {hi}]"
            )));
        }
        let (j, s) = self.locate(u);
        let h = self.knots[j + 2] - self.knots[j + 1];
        Ok(self.spans[j].derivative(s) * (1.0 / h))
    }

    fn build_arc_table(&self) -> Vec<(f64, f64)> {
        const SUBSTEPS: usize = 8;
        let (lo, _) = self.domain();
        let mut table = vec![(lo, 0.0)];
        let mut total = 0.0;
        for (j, span) in self.spans.iter().enumerate() {
            let (a, b) = (self.knots[j + 1], self.knots[j + 2]);
            if b <= a {
                continue;
            }
            // Coarse chord estimate decides how many table rows this span gets.
            let rough: f64 = (0..16)
                .map(|k| span.eval(k as f64 / 16.0).distance(span.eval((k + 1) as f64 / 16.0)))
                .sum();
            let rows = ((rough / ARC_TABLE_RESOLUTION).ceil() as usize).max(1);
            let fine = rows * SUBSTEPS;
            let mut prev = span.eval(0.0);
            for k in 1..=fine {
                let s = k as f64 / fine as f64;
                let p = span.eval(s);
                total += prev.distance(p);
                prev = p;
                if k % SUBSTEPS == 0 && total > table.last().unwrap().1 {
                    table.push((a + s * (b - a), total));
                }
            }
        }
        table
    }

    /// Knot parameter at arc length `d` (clamped into `[0, L]`).
    pub fn param_at_arclength(&self, d: f64) -> f64 {
        let t = &self.arc_table;
        let d = d.clamp(0.0, self.length());
        let i = t.partition_point(|e| e.1 < d);
        if i == 0 {
            return t[0].0;
        }
        if i >= t.len() {
            return t[t.len() - 1].0;
        }
        let (u0, s0) = t[i - 1];
        let (u1, s1) = t[i];
        u0 + (u1 - u0) * (d - s0) / (s1 - s0)
    }

    /// Position and tangent heading at arc length `d`. Out-of-range distances
    /// are clamped to the endpoints and flagged.
    pub fn point_at_arclength(&self, d: f64) -> ArcPoint {
        let clamped = !(0.0..=self.length()).contains(&d);
        let u = self.param_at_arclength(d);
        let (j, s) = self.locate(u);
        let position = self.spans[j].eval(s);
        let mut tangent = self.spans[j].derivative(s);
        if tangent.norm() < 1e-9 {
            // Duplicated end points give a zero derivative; fall back to the chord.
            let (lo, hi) = self.domain();
            let eps = 1e-4 * (hi - lo);
            tangent = self.eval_unchecked((u + eps).min(hi)) - self.eval_unchecked((u - eps).max(lo));
        }
        ArcPoint {
            position,
            heading: normalize_angle(tangent.angle()),
            clamped,
        }
    }

    /// Dense polyline through the arc table, for rendering and lane queries.
    pub fn polyline(&self) -> Vec<Vec2> {
        self.arc_table
            .iter()
            .map(|&(u, _)| self.eval_unchecked(u))
            .collect()
    }
}
