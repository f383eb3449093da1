//! Planar geometry primitives.
//!
//! All internal coordinates are meters in a local planar projection.
//! Geographic inputs are projected once at ingestion with a local
//! equirectangular approximation, which is accurate to well under a meter
//! over the ~20 km areas this crate targets.

use serde::{Deserialize, Serialize};

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Centroid of a nonempty point set.
pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Equirectangular projection of (lat, lon) degrees around a reference point.
pub fn project_latlon(lat: f64, lon: f64, ref_lat: f64, ref_lon: f64) -> Point {
    let lat_r = lat.to_radians();
    let lon_r = lon.to_radians();
    let ref_lat_r = ref_lat.to_radians();
    let ref_lon_r = ref_lon.to_radians();
    Point::new(
        EARTH_RADIUS_M * (lon_r - ref_lon_r) * ref_lat_r.cos(),
        EARTH_RADIUS_M * (lat_r - ref_lat_r),
    )
}
