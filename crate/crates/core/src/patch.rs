//! Oriented, min-subtracted heightmap patches.
//!
//! A patch is the square of ground the robot is about to cross. Its bottom
//! edge is centered on the start point `p` and its top edge on the point
//! `side` meters ahead along the heading, so travel always runs from the
//! last row to the first row along the center column.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{heading_vector, right_vector, Point2};
use crate::gridfile;
use crate::telemetry::PathSegment;
use crate::terrain::Heightmap;

/// Matrix side of a full-resolution patch.
pub const FULL_PATCH_N: usize = 256;
pub const DEFAULT_PATCH_SIDE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HeightPatch {
    n: usize,
    side: f64,
    origin: Point2,
    heading: f64,
    values: Vec<f64>,
}

impl HeightPatch {
    /// Wraps an already min-subtracted matrix, mostly useful for tests and
    /// synthetic inputs.
    pub fn from_values(n: usize, side: f64, values: Vec<f64>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::invalid(format!(
                "patch needs n >= 2 and n*n values (n = {n}, got {})",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("patch values must be finite"));
        }
        let mut patch = HeightPatch {
            n,
            side,
            origin: Point2::default(),
            heading: 0.0,
            values,
        };
        patch.subtract_min();
        Ok(patch)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    /// Height of the top-center point relative to the bottom-center point,
    /// i.e. the climb along the travel direction.
    pub fn centerline_rise(&self) -> f64 {
        let n = self.n;
        let center = |row: usize| {
            if n % 2 == 1 {
                self.get(row, n / 2)
            } else {
                0.5 * (self.get(row, n / 2 - 1) + self.get(row, n / 2))
            }
        };
        center(0) - center(n - 1)
    }

    fn subtract_min(&mut self) {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        self.values.iter_mut().for_each(|v| *v -= min);
    }

    /// Writes the patch in the heightmap directory layout.
    pub fn save(&self, dir: &Path) -> Result<()> {
        gridfile::write_meta(
            dir,
            &PatchMeta {
                rows: self.n,
                cols: self.n,
                resolution_m: self.side / (self.n - 1) as f64,
                origin_x_m: self.origin.x,
                origin_y_m: self.origin.y,
                heading_rad: self.heading,
                side_m: self.side,
            },
        )?;
        gridfile::write_f32_plane(&dir.join("heights.f32"), self.values.iter().copied())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PatchMeta {
    rows: usize,
    cols: usize,
    resolution_m: f64,
    origin_x_m: f64,
    origin_y_m: f64,
    heading_rad: f64,
    side_m: f64,
}

/// Samples an `n`×`n` patch whose bottom-edge midpoint is `p`, oriented
/// along `heading`.
///
/// Entry `(i, j)` is the terrain at `p + u_j·r̂ + w_i·d̂` with
/// `u_j = −side/2 + side·j/(n−1)` and `w_i = side·(n−1−i)/(n−1)`, where `d̂`
/// points along the heading and `r̂` to its right. The matrix minimum is
/// subtracted afterwards.
pub fn extract_patch(
    hm: &Heightmap,
    p: Point2,
    heading: f64,
    side: f64,
    n: usize,
) -> Result<HeightPatch> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "patch side count must be >= 2, got {n}"
        )));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::invalid(format!(
            "patch side must be positive, got {side}"
        )));
    }
    let (dx, dy) = heading_vector(heading);
    let (rx, ry) = right_vector(heading);
    let half = 0.5 * side;
    let corners = [
        (p.x - half * rx, p.y - half * ry),
        (p.x + half * rx, p.y + half * ry),
        (p.x - half * rx + side * dx, p.y - half * ry + side * dy),
        (p.x + half * rx + side * dx, p.y + half * ry + side * dy),
    ];
    if let Some(&(x, y)) = corners.iter().find(|&&(x, y)| !hm.contains(x, y)) {
        return Err(Error::OutOfBounds { x, y });
    }

    let reference = hm.nearest_value(p)?;
    let step = side / (n - 1) as f64;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let w = step * (n - 1 - i) as f64;
        for j in 0..n {
            let u = -half + step * j as f64;
            let x = p.x + u * rx + w * dx;
            let y = p.y + u * ry + w * dy;
            values.push(hm.sample_relative(x, y, reference)?);
        }
    }
    let mut patch = HeightPatch {
        n,
        side,
        origin: p,
        heading,
        values,
    };
    patch.subtract_min();
    Ok(patch)
}

/// The patch a segment's robot crossed, sampled at `n`×`n`.
pub fn patch_for_segment(hm: &Heightmap, seg: &PathSegment, n: usize) -> Result<HeightPatch> {
    extract_patch(hm, seg.p.xy(), seg.heading, seg.length_h, n)
}
