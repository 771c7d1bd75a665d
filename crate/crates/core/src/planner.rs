//! Directional energy-cost maps and minimum-energy grid planning.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bearing_of, Point2};
use crate::gridfile;
use crate::learned::PatchRegressor;
use crate::patch::{extract_patch, HeightPatch, DEFAULT_PATCH_SIDE};
use crate::physics::PhysicsParams;
use crate::telemetry::scale_energy;
use crate::terrain::Heightmap;

/// Smallest cost stored for a traversable edge.
pub const COST_FLOOR: f64 = 1e-6;
pub const DEFAULT_CELL_SIZE: f64 = 1.0;
pub const DEFAULT_NEIGHBORHOOD: usize = 8;

/// Anything that maps a patch to scaled energy.
pub trait EnergyPredictor: Sync {
    /// Side count of the patches this predictor consumes.
    fn patch_n(&self) -> usize;
    fn predict(&self, patch: &HeightPatch) -> Result<f64>;
}

/// The friction-plus-gravity model applied to a patch's centerline slope.
#[derive(Debug, Clone, Copy)]
pub struct PhysicsPredictor {
    pub params: PhysicsParams,
    pub n: usize,
}

impl PhysicsPredictor {
    pub fn new(params: PhysicsParams) -> Self {
        PhysicsPredictor { params, n: 5 }
    }
}

impl EnergyPredictor for PhysicsPredictor {
    fn patch_n(&self) -> usize {
        self.n
    }

    fn predict(&self, patch: &HeightPatch) -> Result<f64> {
        let slope = patch.centerline_rise().atan2(patch.side());
        Ok(scale_energy(
            self.params.predict_energy(slope, patch.side()),
        ))
    }
}

impl EnergyPredictor for PatchRegressor {
    fn patch_n(&self) -> usize {
        self.input_n()
    }

    fn predict(&self, patch: &HeightPatch) -> Result<f64> {
        PatchRegressor::predict(self, patch)
    }
}

/// Returns the same value for every patch.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub f64);

impl EnergyPredictor for ConstantPredictor {
    fn patch_n(&self) -> usize {
        2
    }

    fn predict(&self, _: &HeightPatch) -> Result<f64> {
        Ok(self.0)
    }
}

/// Wraps a closure as a predictor.
pub struct FnPredictor<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&HeightPatch) -> f64 + Sync> EnergyPredictor for FnPredictor<F> {
    fn patch_n(&self) -> usize {
        self.n
    }

    fn predict(&self, patch: &HeightPatch) -> Result<f64> {
        Ok((self.f)(patch))
    }
}

/// `(d_row, d_col)` steps; rows grow southward.
pub fn neighborhood_offsets(neighborhood: usize) -> Result<Vec<(isize, isize)>> {
    const FOUR: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    const DIAG: [(isize, isize); 4] = [(-1, 1), (1, 1), (1, -1), (-1, -1)];
    const KNIGHT: [(isize, isize); 8] = [
        (-2, 1),
        (-1, 2),
        (1, 2),
        (2, 1),
        (2, -1),
        (1, -2),
        (-1, -2),
        (-2, -1),
    ];
    let mut out = FOUR.to_vec();
    match neighborhood {
        4 => {}
        8 => out.extend(DIAG),
        16 => {
            out.extend(DIAG);
            out.extend(KNIGHT);
        }
        n => {
            return Err(Error::invalid(format!(
                "neighborhood must be 4, 8 or 16, got {n}"
            )))
        }
    }
    Ok(out)
}

/// Per-cell, per-direction edge costs. Blocked edges hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalCostMap {
    rows: usize,
    cols: usize,
    cell_size: f64,
    origin: Point2,
    neighborhood: usize,
    offsets: Vec<(isize, isize)>,
    /// `costs[k * rows * cols + r * cols + c]` for offset `k`.
    costs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CostMapMeta {
    rows: usize,
    cols: usize,
    cell_size_m: f64,
    origin_x_m: f64,
    origin_y_m: f64,
    neighborhood: usize,
    offsets: Vec<(isize, isize)>,
    cost_floor: f64,
}

fn plane_name(k: usize) -> String {
    format!("offset_{k:02}.f32")
}

impl DirectionalCostMap {
    /// Wraps raw costs laid out offset-major. Edges leaving the grid are
    /// forced to blocked; every other cost must be at least [`COST_FLOOR`]
    /// or infinite.
    pub fn from_costs(
        rows: usize,
        cols: usize,
        cell_size: f64,
        origin: Point2,
        neighborhood: usize,
        mut costs: Vec<f64>,
    ) -> Result<Self> {
        let offsets = neighborhood_offsets(neighborhood)?;
        if rows == 0 || cols == 0 || !(cell_size > 0.0) {
            return Err(Error::invalid(
                "cost map needs a non-empty grid and positive cell size",
            ));
        }
        if costs.len() != offsets.len() * rows * cols {
            return Err(Error::invalid(format!(
                "expected {} costs, got {}",
                offsets.len() * rows * cols,
                costs.len()
            )));
        }
        if costs.iter().any(|&c| !(c >= COST_FLOOR)) {
            return Err(Error::invalid(
                "edge costs must be >= the cost floor or blocked",
            ));
        }
        let mut map = DirectionalCostMap {
            rows,
            cols,
            cell_size,
            origin,
            neighborhood,
            offsets,
            costs: Vec::new(),
        };
        for k in 0..map.offsets.len() {
            for r in 0..rows {
                for c in 0..cols {
                    if map.step((r, c), k).is_none() {
                        costs[map.index(k, r, c)] = f64::INFINITY;
                    }
                }
            }
        }
        map.costs = costs;
        Ok(map)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn neighborhood(&self) -> usize {
        self.neighborhood
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    fn index(&self, k: usize, r: usize, c: usize) -> usize {
        (k * self.rows + r) * self.cols + c
    }

    /// Cost of leaving `cell` along offset `k`.
    pub fn cost(&self, cell: (usize, usize), k: usize) -> f64 {
        self.costs[self.index(k, cell.0, cell.1)]
    }

    /// Neighbor reached from `cell` along offset `k`, if inside the grid.
    pub fn step(&self, cell: (usize, usize), k: usize) -> Option<(usize, usize)> {
        let (dr, dc) = self.offsets[k];
        let r = cell.0.checked_add_signed(dr)?;
        let c = cell.1.checked_add_signed(dc)?;
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    /// Cost of the edge `from → to`, if they are neighbors.
    pub fn edge_cost(&self, from: (usize, usize), to: (usize, usize)) -> Option<f64> {
        (0..self.offsets.len())
            .find(|&k| self.step(from, k) == Some(to))
            .map(|k| self.cost(from, k))
    }

    pub fn cell_center(&self, r: usize, c: usize) -> Point2 {
        Point2::new(
            self.origin.x + (c as f64 + 0.5) * self.cell_size,
            self.origin.y + ((self.rows - 1 - r) as f64 + 0.5) * self.cell_size,
        )
    }

    /// The cell containing a world point.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let from_south = ((p.y - self.origin.y) / self.cell_size).floor();
        if c < 0.0 || from_south < 0.0 || c >= self.cols as f64 || from_south >= self.rows as f64 {
            return None;
        }
        Some((self.rows - 1 - from_south as usize, c as usize))
    }

    /// Every cost scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let mut out = self.clone();
        out.costs.iter_mut().for_each(|c| *c *= factor);
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        gridfile::write_meta(
            dir,
            &CostMapMeta {
                rows: self.rows,
                cols: self.cols,
                cell_size_m: self.cell_size,
                origin_x_m: self.origin.x,
                origin_y_m: self.origin.y,
                neighborhood: self.neighborhood,
                offsets: self.offsets.clone(),
                cost_floor: COST_FLOOR,
            },
        )?;
        let plane = self.rows * self.cols;
        for k in 0..self.offsets.len() {
            let values = self.costs[k * plane..(k + 1) * plane].iter().copied();
            gridfile::write_f32_plane(&dir.join(plane_name(k)), values)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: CostMapMeta = gridfile::read_meta(dir)?;
        let expected = neighborhood_offsets(meta.neighborhood)
            .map_err(|e| Error::format(dir, e.to_string()))?;
        if expected != meta.offsets {
            return Err(Error::format(
                dir,
                "offset list does not match the neighborhood",
            ));
        }
        let plane = meta.rows * meta.cols;
        let mut costs = Vec::with_capacity(plane * expected.len());
        for k in 0..expected.len() {
            // f32 rounding can pull a floored cost just under the floor
            costs.extend(
                gridfile::read_f32_plane(&dir.join(plane_name(k)), plane)?
                    .into_iter()
                    .map(|c| c.max(COST_FLOOR)),
            );
        }
        Self::from_costs(
            meta.rows,
            meta.cols,
            meta.cell_size_m,
            Point2::new(meta.origin_x_m, meta.origin_y_m),
            meta.neighborhood,
            costs,
        )
        .map_err(|e| Error::format(dir, e.to_string()))
    }
}

/// Builds a cost map over the cells of size `cell_size` that fit inside the
/// heightmap. Each edge costs `max(COST_FLOOR, f(M)·L)` where `M` is the
/// 1 m patch starting at the source cell center along the edge bearing and
/// `L` the edge length; edges whose patch leaves the map are blocked.
pub fn build_cost_map<P: EnergyPredictor + ?Sized>(
    hm: &Heightmap,
    predictor: &P,
    cell_size: f64,
    neighborhood: usize,
) -> Result<DirectionalCostMap> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    let offsets = neighborhood_offsets(neighborhood)?;
    let (w, h) = hm.extent();
    let cols = (w / cell_size + 1e-9).floor() as usize;
    let rows = (h / cell_size + 1e-9).floor() as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("cell size is larger than the heightmap"));
    }
    let shell = DirectionalCostMap {
        rows,
        cols,
        cell_size,
        origin: hm.origin(),
        neighborhood,
        offsets: offsets.clone(),
        costs: Vec::new(),
    };
    let n = predictor.patch_n();
    let per_cell: Vec<Vec<f64>> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let cell = (idx / cols, idx % cols);
            let u = shell.cell_center(cell.0, cell.1);
            (0..offsets.len())
                .map(|k| {
                    let Some(to) = shell.step(cell, k) else {
                        return Ok(f64::INFINITY);
                    };
                    let v = shell.cell_center(to.0, to.1);
                    let heading = bearing_of(v.x - u.x, v.y - u.y);
                    match extract_patch(hm, u, heading, DEFAULT_PATCH_SIDE, n) {
                        Ok(patch) => {
                            Ok((predictor.predict(&patch)? * u.distance(v)).max(COST_FLOOR))
                        }
                        Err(Error::OutOfBounds { .. }) => Ok(f64::INFINITY),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut costs = vec![f64::INFINITY; offsets.len() * rows * cols];
    for (idx, row) in per_cell.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            costs[k * rows * cols + idx] = c;
        }
    }
    Ok(DirectionalCostMap { costs, ..shell })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// `(row, col)` cells from start to goal.
    pub waypoints: Vec<(usize, usize)>,
    pub total_cost: f64,
    pub per_edge: Vec<f64>,
}

impl PlanResult {
    /// Writes `index,row,col,x_m,y_m,edge_cost,cumulative_cost`.
    pub fn write_csv<W: Write>(&self, map: &DirectionalCostMap, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "index",
            "row",
            "col",
            "x_m",
            "y_m",
            "edge_cost",
            "cumulative_cost",
        ])?;
        let mut cumulative = 0.0;
        for (i, &(r, c)) in self.waypoints.iter().enumerate() {
            let edge = if i == 0 { 0.0 } else { self.per_edge[i - 1] };
            cumulative += edge;
            let p = map.cell_center(r, c);
            wtr.write_record([
                i.to_string(),
                r.to_string(),
                c.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                edge.to_string(),
                cumulative.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn points(&self, map: &DirectionalCostMap) -> Vec<Point2> {
        self.waypoints
            .iter()
            .map(|&(r, c)| map.cell_center(r, c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    cell: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    /// Reversed so the max-heap pops the cheapest, then lowest-index, cell.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-total-cost path by Dijkstra's algorithm.
///
/// Ties are broken deterministically: cells settle in (cost, row-major index)
/// order and a predecessor is replaced only by a strictly cheaper one.
pub fn plan_min_energy(
    map: &DirectionalCostMap,
    start: (usize, usize),
    goal: (usize, usize),
) -> Result<PlanResult> {
    for (name, cell) in [("start", start), ("goal", goal)] {
        if cell.0 >= map.rows || cell.1 >= map.cols {
            return Err(Error::invalid(format!(
                "{name} {cell:?} lies outside the {}x{} grid",
                map.rows, map.cols
            )));
        }
    }
    let n = map.rows * map.cols;
    let flat = |(r, c): (usize, usize)| r * map.cols + c;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[flat(start)] = 0.0;
    heap.push(Frontier {
        cost: 0.0,
        cell: flat(start),
    });

    while let Some(Frontier { cost, cell }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        if cell == flat(goal) {
            break;
        }
        let here = (cell / map.cols, cell % map.cols);
        for k in 0..map.offsets.len() {
            let w = map.cost(here, k);
            if !w.is_finite() {
                continue;
            }
            let Some(next) = map.step(here, k) else {
                continue;
            };
            let j = flat(next);
            let candidate = cost + w;
            if !done[j] && candidate < dist[j] {
                dist[j] = candidate;
                prev[j] = Some((cell, w));
                heap.push(Frontier {
                    cost: candidate,
                    cell: j,
                });
            }
        }
    }

    if !dist[flat(goal)].is_finite() {
        return Err(Error::Unreachable { start, goal });
    }
    let mut cells = vec![flat(goal)];
    let mut per_edge = Vec::new();
    while let Some((p, w)) = prev[*cells.last().expect("non-empty")] {
        cells.push(p);
        per_edge.push(w);
    }
    cells.reverse();
    per_edge.reverse();
    Ok(PlanResult {
        waypoints: cells
            .into_iter()
            .map(|i| (i / map.cols, i % map.cols))
            .collect(),
        // an empty f64 sum is -0.0
        total_cost: per_edge.iter().fold(0.0, |a, c| a + c),
        per_edge,
    })
}

/// One resampled stretch of a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub start: Point2,
    pub end: Point2,
}

impl Chord {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }
}

/// Cuts a polyline into consecutive chords of Euclidean length `unit`,
/// each ending where the path first leaves the circle of radius `unit`
/// around the chord start; the remainder forms a final shorter chord.
pub fn resample_polyline(points: &[Point2], unit: f64) -> Result<Vec<Chord>> {
    if !(unit > 0.0) {
        return Err(Error::invalid("unit length must be positive"));
    }
    let mut chords = Vec::new();
    let Some(&first) = points.first() else {
        return Ok(chords);
    };
    let mut anchor = first;
    let mut piece = 0;
    let mut t = 0.0;
    'outer: while piece + 1 < points.len() {
        let (a, b) = (points[piece], points[piece + 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let qa = dx * dx + dy * dy;
        if qa > 0.0 {
            // |a + s·d − anchor|² = unit², larger root
            let (fx, fy) = (a.x - anchor.x, a.y - anchor.y);
            let qb = 2.0 * (fx * dx + fy * dy);
            let qc = fx * fx + fy * fy - unit * unit;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let s = (-qb + disc.sqrt()) / (2.0 * qa);
                if s >= t && s <= 1.0 {
                    let end = Point2::new(a.x + s * dx, a.y + s * dy);
                    chords.push(Chord { start: anchor, end });
                    anchor = end;
                    t = s;
                    continue 'outer;
                }
            }
        }
        piece += 1;
        t = 0.0;
    }
    let last = *points.last().expect("non-empty");
    if anchor.distance(last) > 0.0 {
        chords.push(Chord {
            start: anchor,
            end: last,
        });
    }
    Ok(chords)
}

fn chord_energy<P: EnergyPredictor + ?Sized>(
    hm: &Heightmap,
    predictor: &P,
    chord: &Chord,
) -> Result<f64> {
    let heading = bearing_of(chord.end.x - chord.start.x, chord.end.y - chord.start.y);
    let patch = extract_patch(
        hm,
        chord.start,
        heading,
        DEFAULT_PATCH_SIDE,
        predictor.patch_n(),
    )?;
    Ok(predictor.predict(&patch)? * chord.length())
}

/// Predicted scaled energy of driving a polyline: the sum over its unit
/// chords, the final partial chord weighted by its length. Raw
/// predictions are summed without clamping.
pub fn path_energy<P: EnergyPredictor + ?Sized>(
    hm: &Heightmap,
    predictor: &P,
    waypoints: &[Point2],
) -> Result<f64> {
    check_polyline(hm, waypoints)?;
    resample_polyline(waypoints, 1.0)?
        .iter()
        .map(|c| chord_energy(hm, predictor, c))
        .sum()
}

/// [`path_energy`] with each chord clamped at [`COST_FLOOR`], matching the
/// cost-map convention.
pub fn path_energy_clamped<P: EnergyPredictor + ?Sized>(
    hm: &Heightmap,
    predictor: &P,
    waypoints: &[Point2],
) -> Result<f64> {
    check_polyline(hm, waypoints)?;
    resample_polyline(waypoints, 1.0)?
        .iter()
        .map(|c| chord_energy(hm, predictor, c).map(|e| e.max(COST_FLOOR)))
        .sum()
}

fn check_polyline(hm: &Heightmap, waypoints: &[Point2]) -> Result<()> {
    match waypoints.iter().find(|p| !hm.contains(p.x, p.y)) {
        Some(p) => Err(Error::OutOfBounds { x: p.x, y: p.y }),
        None => Ok(()),
    }
}

/// A shaded-relief rendering of `hm` with `plan` drawn on top.
pub fn render_plan_svg(hm: &Heightmap, map: &DirectionalCostMap, plan: &PlanResult) -> String {
    const MAX_PIXELS: usize = 160;
    let (w, h) = hm.extent();
    let px_per_m = MAX_PIXELS as f64 / w.max(h);
    let stride = hm.rows().max(hm.cols()).div_ceil(MAX_PIXELS).max(1);
    let (lo, hi) = hm
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let to_px = |p: Point2| {
        (
            (p.x - hm.origin().x) * px_per_m,
            (h - (p.y - hm.origin().y)) * px_per_m,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        w * px_per_m,
        h * px_per_m,
        w * px_per_m,
        h * px_per_m
    );
    let cell_px = hm.resolution() * stride as f64 * px_per_m;
    for r in (0..hm.rows()).step_by(stride) {
        for c in (0..hm.cols()).step_by(stride) {
            let shade = (40.0 + 200.0 * (hm.get(r, c) - lo) / span).round() as u8;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({shade},{shade},{shade})"/>"#,
                c as f64 * hm.resolution() * px_per_m,
                r as f64 * hm.resolution() * px_per_m,
                cell_px,
                cell_px
            );
        }
    }
    let pts: Vec<String> = plan
        .points(map)
        .into_iter()
        .map(|p| {
            let (x, y) = to_px(p);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="red" stroke-width="2"/>"#,
        pts.join(" ")
    );
    for (p, color) in [
        (plan.points(map).first().copied(), "lime"),
        (plan.points(map).last().copied(), "blue"),
    ] {
        if let Some(p) = p {
            let (x, y) = to_px(p);
            let _ = writeln!(
                svg,
                r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{color}"/>"#
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
