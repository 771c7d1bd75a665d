//! Planar geometry in the local metric frame: +x east, +y north, bearings
//! clockwise from north.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves `dist` meters along `bearing`.
    pub fn advance(self, bearing: f64, dist: f64) -> Point2 {
        let (dx, dy) = heading_vector(bearing);
        Point2::new(self.x + dist * dx, self.y + dist * dy)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Unit direction `(sin θ, cos θ)` of a bearing.
pub fn heading_vector(bearing: f64) -> (f64, f64) {
    bearing.sin_cos()
}

/// Right-hand unit vector `(cos θ, -sin θ)` of a bearing.
pub fn right_vector(bearing: f64) -> (f64, f64) {
    let (s, c) = bearing.sin_cos();
    (c, -s)
}

/// Bearing of the displacement `(dx, dy)`, normalized to `[0, 2π)`.
pub fn bearing_of(dx: f64, dy: f64) -> f64 {
    normalize_bearing(dx.atan2(dy))
}

pub fn normalize_bearing(theta: f64) -> f64 {
    let b = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if b >= TAU {
        0.0
    } else {
        b
    }
}

/// Axis-aligned rectangle in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Shrinks every side by `margin`.
    pub fn inset(&self, margin: f64) -> Rect {
        Rect::new(
            self.min_x + margin,
            self.min_y + margin,
            self.max_x - margin,
            self.max_y - margin,
        )
    }
}
