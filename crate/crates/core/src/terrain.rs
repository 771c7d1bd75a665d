//! Gridded terrain altitudes with bilinear sampling between cell centers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{heading_vector, Point2, Point3};
use crate::gridfile;

/// Default cell size for surfaces fitted from trajectory points.
pub const DEFAULT_FIT_RESOLUTION: f64 = 0.25;

const HEIGHTS_BIN: &str = "heights.f32";
const HEIGHTS_CSV: &str = "heights.csv";

// Slack for queries that land on the outermost cell centers after rounding.
const BOUNDS_EPS: f64 = 1e-9;

/// A regular grid of altitudes.
///
/// Row 0 is the northmost row. `origin` is the south-west corner of the
/// grid, so the center of cell `(r, c)` sits at
/// `origin + ((c + 0.5)·res, (rows − 1 − r + 0.5)·res)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    rows: usize,
    cols: usize,
    resolution: f64,
    origin: Point2,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeightmapMeta {
    pub rows: usize,
    pub cols: usize,
    pub resolution_m: f64,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
}

impl Heightmap {
    /// Validates and wraps a row-major altitude matrix.
    pub fn from_grid(
        rows: usize,
        cols: usize,
        resolution: f64,
        origin: Point2,
        values: Vec<f64>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(format!(
                "heightmap needs at least 2x2 cells, got {rows}x{cols}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} values for {rows}x{cols}, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite altitude at row {}, col {}",
                i / cols,
                i % cols
            )));
        }
        Ok(Heightmap {
            rows,
            cols,
            resolution,
            origin,
            values,
        })
    }

    /// Builds a map by evaluating `f(x, y)` at every cell center.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        resolution: f64,
        origin: Point2,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = cell_center(rows, resolution, origin, r, c);
                values.push(f(p.x, p.y));
            }
        }
        Self::from_grid(rows, cols, resolution, origin, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        cell_center(self.rows, self.resolution, self.origin, row, col)
    }

    /// Total grid extent in meters (east-west, north-south).
    pub fn extent(&self) -> (f64, f64) {
        (
            self.cols as f64 * self.resolution,
            self.rows as f64 * self.resolution,
        )
    }

    /// The rectangle spanned by cell centers, which is where sampling is defined.
    pub fn sample_bounds(&self) -> crate::geom::Rect {
        let half = 0.5 * self.resolution;
        let (w, h) = self.extent();
        crate::geom::Rect::new(
            self.origin.x + half,
            self.origin.y + half,
            self.origin.x + w - half,
            self.origin.y + h - half,
        )
    }

    /// Continuous (row, col) index of a world point. Indices within 1e-9 of
    /// an integer snap to it, so cell centers sample their own value.
    fn grid_coords(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r
            } else {
                v
            }
        };
        let col = snap((x - self.origin.x) / self.resolution - 0.5);
        let row = snap((self.rows - 1) as f64 - ((y - self.origin.y) / self.resolution - 0.5));
        let max_r = (self.rows - 1) as f64;
        let max_c = (self.cols - 1) as f64;
        if !(row >= -BOUNDS_EPS && row <= max_r + BOUNDS_EPS)
            || !(col >= -BOUNDS_EPS && col <= max_c + BOUNDS_EPS)
        {
            return None;
        }
        Some((row.clamp(0.0, max_r), col.clamp(0.0, max_c)))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.grid_coords(x, y).is_some()
    }

    /// Bilinear interpolation of the four surrounding cell centers.
    pub fn sample_height(&self, x: f64, y: f64) -> Result<f64> {
        let (row, col) = self.grid_coords(x, y).ok_or(Error::OutOfBounds { x, y })?;
        let r0 = (row.floor() as usize).min(self.rows - 2);
        let c0 = (col.floor() as usize).min(self.cols - 2);
        let tr = row - r0 as f64;
        let tc = col - c0 as f64;
        let v00 = self.get(r0, c0);
        let v01 = self.get(r0, c0 + 1);
        let v10 = self.get(r0 + 1, c0);
        let v11 = self.get(r0 + 1, c0 + 1);
        let top = v00 + tc * (v01 - v00);
        let bottom = v10 + tc * (v11 - v10);
        Ok(top + tr * (bottom - top))
    }

    /// Bilinear interpolation of `value − reference`. Differences are taken
    /// before interpolating, so shifting the whole map and the reference by
    /// an exactly representable constant leaves the result bit-identical.
    pub fn sample_relative(&self, x: f64, y: f64, reference: f64) -> Result<f64> {
        let (row, col) = self.grid_coords(x, y).ok_or(Error::OutOfBounds { x, y })?;
        let r0 = (row.floor() as usize).min(self.rows - 2);
        let c0 = (col.floor() as usize).min(self.cols - 2);
        let tr = row - r0 as f64;
        let tc = col - c0 as f64;
        let v00 = self.get(r0, c0) - reference;
        let v01 = self.get(r0, c0 + 1) - reference;
        let v10 = self.get(r0 + 1, c0) - reference;
        let v11 = self.get(r0 + 1, c0 + 1) - reference;
        let top = v00 + tc * (v01 - v00);
        let bottom = v10 + tc * (v11 - v10);
        Ok(top + tr * (bottom - top))
    }

    /// Value of the cell whose center is nearest to `p`.
    pub fn nearest_value(&self, p: Point2) -> Result<f64> {
        let (row, col) = self
            .grid_coords(p.x, p.y)
            .ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
        Ok(self.get(row.round() as usize, col.round() as usize))
    }

    pub fn sample_at(&self, p: Point2) -> Result<f64> {
        self.sample_height(p.x, p.y)
    }

    /// Slope angle from `p` to the point `d` meters along `heading`.
    pub fn slope_along(&self, p: Point2, heading: f64, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::invalid(format!(
                "slope distance must be positive, got {d}"
            )));
        }
        let (dx, dy) = heading_vector(heading);
        let q = Point2::new(p.x + d * dx, p.y + d * dy);
        let hp = self.sample_at(p)?;
        let hq = self.sample_at(q)?;
        Ok((hq - hp).atan2(d))
    }

    /// Returns a copy with `offset` added to every altitude.
    pub fn offset(&self, offset: f64) -> Heightmap {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += offset);
        out
    }

    pub fn meta(&self) -> HeightmapMeta {
        HeightmapMeta {
            rows: self.rows,
            cols: self.cols,
            resolution_m: self.resolution,
            origin_x_m: self.origin.x,
            origin_y_m: self.origin.y,
        }
    }

    /// Writes `meta.json` and `heights.f32` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        gridfile::write_meta(dir, &self.meta())?;
        gridfile::write_f32_plane(&dir.join(HEIGHTS_BIN), self.values.iter().copied())
    }

    /// Loads a heightmap directory, preferring `heights.f32` over `heights.csv`.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: HeightmapMeta = gridfile::read_meta(dir)?;
        let count = meta.rows * meta.cols;
        let bin = dir.join(HEIGHTS_BIN);
        let values = if bin.exists() {
            gridfile::read_f32_plane(&bin, count)?
        } else {
            let csv = dir.join(HEIGHTS_CSV);
            if !csv.exists() {
                return Err(Error::format(
                    dir,
                    "neither heights.f32 nor heights.csv found",
                ));
            }
            gridfile::read_csv_matrix(&csv, meta.rows, meta.cols)?
        };
        Heightmap::from_grid(
            meta.rows,
            meta.cols,
            meta.resolution_m,
            Point2::new(meta.origin_x_m, meta.origin_y_m),
            values,
        )
    }
}

fn cell_center(rows: usize, resolution: f64, origin: Point2, row: usize, col: usize) -> Point2 {
    Point2::new(
        origin.x + (col as f64 + 0.5) * resolution,
        origin.y + ((rows - 1 - row) as f64 + 0.5) * resolution,
    )
}

/// Fits a gridded surface to scattered 3-D points.
///
/// Each cell takes the mean altitude of the points that fall into it. Empty
/// cells are seeded by repeated neighbor averaging and then relaxed towards
/// the discrete Laplace solution with the data cells held fixed. Finally
/// `smoothing_passes` rounds of 3×3 mean filtering are applied.
pub fn fit_surface_from_points(
    points: &[Point3],
    resolution: f64,
    smoothing_passes: usize,
) -> Result<Heightmap> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "surface fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if points
        .iter()
        .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        return Err(Error::invalid("surface fit points must be finite"));
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    if !(max_x > min_x && max_y > min_y) {
        return Err(Error::invalid("points span a zero-area bounding box"));
    }
    if !has_non_collinear_triple(points) {
        return Err(Error::invalid("surface fit points are collinear"));
    }

    // Snap to multiples of the resolution, then pad one cell on every side.
    let origin = Point2::new(
        (min_x / resolution).floor() * resolution - resolution,
        (min_y / resolution).floor() * resolution - resolution,
    );
    let cols = ((max_x - origin.x) / resolution).floor() as usize + 2;
    let rows = ((max_y - origin.y) / resolution).floor() as usize + 2;

    let mut sums = vec![0.0; rows * cols];
    let mut counts = vec![0usize; rows * cols];
    for p in points {
        let c = ((p.x - origin.x) / resolution).floor() as usize;
        let south = ((p.y - origin.y) / resolution).floor() as usize;
        let r = rows - 1 - south;
        sums[r * cols + c] += p.z;
        counts[r * cols + c] += 1;
    }
    let known: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
    let mut values: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
        .collect();

    flood_fill(&mut values, rows, cols);
    relax_unknown(&mut values, &known, rows, cols);
    for _ in 0..smoothing_passes {
        values = mean_filter_3x3(&values, rows, cols);
    }
    Heightmap::from_grid(rows, cols, resolution, origin, values)
}

fn has_non_collinear_triple(points: &[Point3]) -> bool {
    let a = points[0];
    // farthest point from a, then the point farthest from the line through both
    let b = points
        .iter()
        .copied()
        .max_by(|p, q| {
            let dp = (p.x - a.x).hypot(p.y - a.y);
            let dq = (q.x - a.x).hypot(q.y - a.y);
            dp.total_cmp(&dq)
        })
        .unwrap_or(a);
    let (ux, uy) = (b.x - a.x, b.y - a.y);
    let len = ux.hypot(uy);
    if len == 0.0 {
        return false;
    }
    points
        .iter()
        .any(|p| ((p.x - a.x) * uy - (p.y - a.y) * ux).abs() / len > 1e-9 * len.max(1.0))
}

fn neighbors4(
    r: usize,
    c: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let up = (r > 0).then(|| (r - 1, c));
    let down = (r + 1 < rows).then_some((r + 1, c));
    let left = (c > 0).then(|| (r, c - 1));
    let right = (c + 1 < cols).then_some((r, c + 1));
    [up, down, left, right].into_iter().flatten()
}

/// Assigns every NaN cell the mean of its finite 4-neighbors, sweeping until
/// no NaN remains.
fn flood_fill(values: &mut [f64], rows: usize, cols: usize) {
    loop {
        let snapshot = values.to_vec();
        let mut remaining = false;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if !snapshot[i].is_nan() {
                    continue;
                }
                let (sum, n) = neighbors4(r, c, rows, cols)
                    .map(|(nr, nc)| snapshot[nr * cols + nc])
                    .filter(|v| v.is_finite())
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n > 0 {
                    values[i] = sum / n as f64;
                } else {
                    remaining = true;
                }
            }
        }
        if !remaining {
            break;
        }
    }
}

fn relax_unknown(values: &mut [f64], known: &[bool], rows: usize, cols: usize) {
    const MAX_SWEEPS: usize = 2000;
    const TOL: f64 = 1e-9;
    if known.iter().all(|&k| k) {
        return;
    }
    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if known[i] {
                    continue;
                }
                let (sum, n) = neighbors4(r, c, rows, cols)
                    .fold((0.0, 0usize), |(s, n), (nr, nc)| {
                        (s + values[nr * cols + nc], n + 1)
                    });
                let next = sum / n as f64;
                max_change = max_change.max((next - values[i]).abs());
                values[i] = next;
            }
        }
        if max_change < TOL {
            break;
        }
    }
}

fn mean_filter_3x3(values: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0.0;
            let mut n = 0usize;
            for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    sum += values[nr * cols + nc];
                    n += 1;
                }
            }
            out[r * cols + c] = sum / n as f64;
        }
    }
    out
}
