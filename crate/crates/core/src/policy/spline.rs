//! Decoding spline actions into paths: lateral deviations from the route
//! centerline at evenly spaced stations.

use crate::error::Result;
use crate::geometry::{Spline, Vec2};
use crate::map::{polyline_length, polyline_point};

pub const STATIONS: usize = 5;
pub const BINS: usize = 7;
/// Bin whose offset is zero.
pub const CENTER_BIN: usize = BINS / 2;
/// Keeps the outermost deviation one body half-width plus 0.5 m from the edge.
pub const EDGE_MARGIN: f64 = 1.5;

/// Lateral offset of a bin, positive to the right of travel.
pub fn deviation_offset(bin: usize, road_width: f64) -> f64 {
    let max = (road_width / 2.0 - EDGE_MARGIN).max(0.0);
    max * (bin as f64 - CENTER_BIN as f64) / CENTER_BIN as f64
}

/// Control points for one bin per station; station `k` lies at fraction
/// `k / (STATIONS - 1)` of the centerline length.
pub fn station_points(centerline: &[Vec2], road_width: f64, bins: &[usize]) -> Vec<Vec2> {
    let length = polyline_length(centerline);
    bins.iter()
        .enumerate()
        .map(|(k, &bin)| {
            let d = length * k as f64 / (bins.len() - 1) as f64;
            let (p, dir) = polyline_point(centerline, d);
            // Right of travel is the clockwise normal.
            p - dir.perp() * deviation_offset(bin, road_width)
        })
        .collect()
}

pub fn decode_spline(centerline: &[Vec2], road_width: f64, bins: &[usize]) -> Result<Spline> {
    Spline::through(&station_points(centerline, road_width, bins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn straight() -> Vec<Vec2> {
        vec![Vec2::new(-40.0, 0.0), Vec2::new(40.0, 0.0)]
    }

    #[test]
    fn offsets_for_twelve_metre_road() {
        let offs: Vec<f64> = (0..BINS).map(|b| deviation_offset(b, 12.0)).collect();
        assert_eq!(offs, vec![-4.5, -3.0, -1.5, 0.0, 1.5, 3.0, 4.5]);
    }

    #[test]
    fn centre_bins_follow_centerline() {
        let s = decode_spline(&straight(), 12.0, &[CENTER_BIN; STATIONS]).unwrap();
        for k in 0..=80 {
            let p = s.point_at_arclength(k as f64);
            assert_abs_diff_eq!(p.position.y, 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(s.length(), 80.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_bin_gives_parallel_line_on_the_right() {
        // Travelling +x, right is −y; bin 5 is +w/4.
        let s = decode_spline(&straight(), 12.0, &[5; STATIONS]).unwrap();
        for k in 0..=80 {
            assert_abs_diff_eq!(s.point_at_arclength(k as f64).position.y, -3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixed_bins_interpolate_stations() {
        let bins = [3, 6, 0, 4, 2];
        let pts = station_points(&straight(), 12.0, &bins);
        let s = decode_spline(&straight(), 12.0, &bins).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let q = s.eval(s.knots()[i + 1]).unwrap();
            assert!(q.distance(*p) < 1e-9);
            assert!(p.y.abs() <= 6.0 - EDGE_MARGIN);
        }
    }
}
