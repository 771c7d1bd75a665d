//! Synthetic terrain and a ground-truth robot energy oracle.
//!
//! Terrain is smooth value noise scaled to a slope budget plus patchy
//! high-frequency roughness. The oracle drives the robot at constant speed
//! along a polyline and logs power drawn against friction, gravity and a
//! roughness resistance that grows with the local unevenness of the ground.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bearing_of, Point2, Rect};
use crate::physics::STANDARD_GRAVITY;
use crate::telemetry::{TelemetryLog, TelemetrySample, NOMINAL_VOLTAGE};
use crate::terrain::Heightmap;

/// Lattice value noise in `[-1, 1]` with quintic fade.
#[derive(Debug, Clone, Copy)]
pub struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    pub fn new(seed: u64) -> Self {
        ValueNoise { seed }
    }

    fn lattice(&self, ix: i64, iy: i64) -> f64 {
        let mut h = self.seed ^ 0x9E37_79B9_7F4A_7C15;
        h = splitmix(h ^ (ix as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
        h = splitmix(h ^ (iy as u64).wrapping_mul(0xA076_1D64_78BD_642F));
        // top 53 bits → [0, 1)
        let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * unit - 1.0
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (ix, iy) = (fx as i64, fy as i64);
        let (tx, ty) = (fade(x - fx), fade(y - fy));
        let v00 = self.lattice(ix, iy);
        let v10 = self.lattice(ix + 1, iy);
        let v01 = self.lattice(ix, iy + 1);
        let v11 = self.lattice(ix + 1, iy + 1);
        let a = v00 + tx * (v10 - v00);
        let b = v01 + tx * (v11 - v01);
        a + ty * (b - a)
    }

    /// Sum of `octaves` layers, each at twice the frequency and half the
    /// amplitude of the previous one, normalized back into `[-1, 1]`.
    pub fn fbm(&self, x: f64, y: f64, octaves: u32) -> f64 {
        let mut sum = 0.0;
        let mut norm = 0.0;
        let mut amp = 1.0;
        let mut freq = 1.0;
        for o in 0..octaves {
            let layer = ValueNoise::new(self.seed.wrapping_add(o as u64 * 0x51_7CC1));
            sum += amp * layer.sample(x * freq, y * freq);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        sum / norm
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn default_base_scale() -> f64 {
    15.0
}
fn default_roughness_scale() -> f64 {
    0.5
}
fn default_roughness_patch_scale() -> f64 {
    6.0
}
fn default_max_slope() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution_m: f64,
    #[serde(default = "default_max_slope")]
    pub max_slope_deg: f64,
    pub roughness_amp_m: f64,
    pub seed: u64,
    /// Wavelength of the coarsest smooth octave.
    #[serde(default = "default_base_scale")]
    pub base_scale_m: f64,
    /// Wavelength of the roughness texture.
    #[serde(default = "default_roughness_scale")]
    pub roughness_scale_m: f64,
    /// Size of the rough and smooth patches the texture is modulated by.
    #[serde(default = "default_roughness_patch_scale")]
    pub roughness_patch_scale_m: f64,
}

impl TerrainSpec {
    /// A 60 m × 40 m site.
    pub fn site(seed: u64) -> Self {
        TerrainSpec {
            width_m: 60.0,
            height_m: 40.0,
            resolution_m: 0.25,
            max_slope_deg: 5.0,
            roughness_amp_m: 0.03,
            seed,
            base_scale_m: default_base_scale(),
            roughness_scale_m: default_roughness_scale(),
            roughness_patch_scale_m: default_roughness_patch_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.width_m,
            self.height_m,
            self.resolution_m,
            self.base_scale_m,
            self.roughness_scale_m,
            self.roughness_patch_scale_m,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "terrain dimensions and scales must be positive",
            ));
        }
        if !(self.max_slope_deg >= 0.0 && self.max_slope_deg < 60.0) {
            return Err(Error::invalid(format!(
                "max slope {} out of range",
                self.max_slope_deg
            )));
        }
        if !(self.roughness_amp_m >= 0.0 && self.roughness_amp_m.is_finite()) {
            return Err(Error::invalid("roughness amplitude must be non-negative"));
        }
        if self.width_m / self.resolution_m < 2.0 || self.height_m / self.resolution_m < 2.0 {
            return Err(Error::invalid("terrain must span at least 2x2 cells"));
        }
        Ok(())
    }

    /// Largest adjacent-cell slope (as a gradient) the roughness layer can add.
    pub fn roughness_allowance(&self) -> f64 {
        2.0 * self.roughness_amp_m / self.resolution_m
    }
}

/// Generates a heightmap with origin `(0, 0)`.
///
/// The smooth layer is rescaled so its steepest adjacent-cell gradient is
/// exactly `tan(max_slope)`; roughness of amplitude `roughness_amp_m`,
/// switched on and off by a slower noise field, is added on top. Heights are
/// rounded to `f32`, the precision of saved maps.
pub fn generate_terrain(spec: &TerrainSpec) -> Result<Heightmap> {
    spec.validate()?;
    let rows = (spec.height_m / spec.resolution_m).round() as usize;
    let cols = (spec.width_m / spec.resolution_m).round() as usize;
    let res = spec.resolution_m;
    let origin = Point2::default();

    let base = ValueNoise::new(spec.seed);
    let smooth = Heightmap::from_fn(rows, cols, res, origin, |x, y| {
        base.fbm(x / spec.base_scale_m, y / spec.base_scale_m, 3)
    })?;
    let max_grad = max_adjacent_gradient(&smooth);
    let target = spec.max_slope_deg.to_radians().tan();
    let scale = if max_grad > 0.0 {
        target / max_grad
    } else {
        0.0
    };

    let texture = ValueNoise::new(spec.seed.wrapping_add(0xA5A5));
    let patches = ValueNoise::new(spec.seed.wrapping_add(0x5A5A));
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let p = smooth.cell_center(r, c);
            let mut h = scale * smooth.get(r, c);
            if spec.roughness_amp_m > 0.0 {
                let s = spec.roughness_patch_scale_m;
                let intensity = (0.5 + patches.sample(p.x / s, p.y / s)).clamp(0.0, 1.0);
                let t = spec.roughness_scale_m;
                h += spec.roughness_amp_m * intensity * texture.fbm(p.x / t, p.y / t, 2);
            }
            values.push(h as f32 as f64);
        }
    }
    Heightmap::from_grid(rows, cols, res, origin, values)
}

/// Steepest finite-difference gradient between 4-adjacent cells.
pub fn max_adjacent_gradient(hm: &Heightmap) -> f64 {
    let mut max: f64 = 0.0;
    for r in 0..hm.rows() {
        for c in 0..hm.cols() {
            let v = hm.get(r, c);
            if c + 1 < hm.cols() {
                max = max.max((hm.get(r, c + 1) - v).abs());
            }
            if r + 1 < hm.rows() {
                max = max.max((hm.get(r + 1, c) - v).abs());
            }
        }
    }
    max / hm.resolution()
}

/// Smooth friction coefficient field `mean + amplitude·noise(x/scale, y/scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuField {
    pub mean: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_mu_scale")]
    pub scale_m: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mu_scale() -> f64 {
    20.0
}

impl Default for MuField {
    /// Spans `[0.05, 0.30]`.
    fn default() -> Self {
        MuField {
            mean: 0.175,
            amplitude: 0.125,
            scale_m: default_mu_scale(),
            seed: 0,
        }
    }
}

impl MuField {
    pub fn constant(mu: f64) -> Self {
        MuField {
            mean: mu,
            amplitude: 0.0,
            scale_m: default_mu_scale(),
            seed: 0,
        }
    }

    pub fn at(&self, x: f64, y: f64) -> f64 {
        if self.amplitude == 0.0 {
            return self.mean;
        }
        let noise = ValueNoise::new(self.seed);
        self.mean + self.amplitude * noise.sample(x / self.scale_m, y / self.scale_m)
    }
}

fn default_voltage() -> f64 {
    NOMINAL_VOLTAGE
}
fn default_speed() -> f64 {
    0.5
}
fn default_mass() -> f64 {
    20.0
}
fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}
fn default_noise() -> f64 {
    0.03
}
fn default_idle() -> f64 {
    2.0
}
fn default_roughness_window() -> f64 {
    0.5
}

/// The oracle that turns motion over terrain into power draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthModel {
    #[serde(default)]
    pub mu_field: MuField,
    /// Extra resistance per meter of local RMS roughness.
    #[serde(default)]
    pub roughness_coeff: f64,
    /// Half-width of the window the local roughness is measured over.
    #[serde(default = "default_roughness_window")]
    pub roughness_window_m: f64,
    #[serde(default = "default_mass")]
    pub mass_kg: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    #[serde(default = "default_voltage")]
    pub voltage_v: f64,
    /// Standard deviation of the multiplicative power noise.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    /// Power floor; the drivetrain never regenerates.
    #[serde(default = "default_idle")]
    pub idle_power_w: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GroundTruthModel {
    fn default() -> Self {
        GroundTruthModel {
            mu_field: MuField::default(),
            roughness_coeff: 0.0,
            roughness_window_m: default_roughness_window(),
            mass_kg: default_mass(),
            gravity: default_gravity(),
            speed_mps: default_speed(),
            voltage_v: default_voltage(),
            noise_sigma: default_noise(),
            idle_power_w: default_idle(),
            seed: 0,
        }
    }
}

impl GroundTruthModel {
    /// Constant friction, no roughness, no noise.
    pub fn ideal(mu: f64) -> Self {
        GroundTruthModel {
            mu_field: MuField::constant(mu),
            noise_sigma: 0.0,
            ..GroundTruthModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.mu_field;
        if !(f.mean - f.amplitude.abs() > 0.0) || !(f.scale_m > 0.0) {
            return Err(Error::invalid(
                "friction field must stay positive everywhere",
            ));
        }
        if !(self.mass_kg > 0.0
            && self.gravity > 0.0
            && self.speed_mps > 0.0
            && self.voltage_v > 0.0)
        {
            return Err(Error::invalid(
                "mass, gravity, speed and voltage must be positive",
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.idle_power_w >= 0.0 && self.roughness_coeff >= 0.0) {
            return Err(Error::invalid(
                "noise, idle power and roughness must be non-negative",
            ));
        }
        if !(self.roughness_window_m > 0.0) {
            return Err(Error::invalid("roughness window must be positive"));
        }
        Ok(())
    }
}

/// Local RMS of altitudes about their neighborhood mean, on the heightmap grid.
pub fn roughness_field(hm: &Heightmap, window_m: f64) -> Result<Heightmap> {
    let radius = ((window_m / hm.resolution()).round() as usize).max(1);
    let residual: Vec<f64> = box_mean(hm.values(), hm.rows(), hm.cols(), radius)
        .iter()
        .zip(hm.values())
        .map(|(m, v)| (v - m) * (v - m))
        .collect();
    let rms = box_mean(&residual, hm.rows(), hm.cols(), radius)
        .into_iter()
        .map(|m| m.max(0.0).sqrt())
        .collect();
    Heightmap::from_grid(hm.rows(), hm.cols(), hm.resolution(), hm.origin(), rms)
}

fn box_mean(values: &[f64], rows: usize, cols: usize, radius: usize) -> Vec<f64> {
    // summed-area table with a zero border
    let w = cols + 1;
    let mut sat = vec![0.0; (rows + 1) * w];
    for r in 0..rows {
        let mut row_sum = 0.0;
        for c in 0..cols {
            row_sum += values[r * cols + c];
            sat[(r + 1) * w + c + 1] = sat[r * w + c + 1] + row_sum;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for r in 0..rows {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(rows));
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(cols));
            let sum = sat[r1 * w + c1] - sat[r0 * w + c1] - sat[r1 * w + c0] + sat[r0 * w + c0];
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    out
}

/// Drives along `waypoints` at the model's speed and records telemetry at `rate` Hz.
pub fn simulate_run(
    hm: &Heightmap,
    model: &GroundTruthModel,
    waypoints: &[Point2],
    rate: f64,
) -> Result<TelemetryLog> {
    model.validate()?;
    if !(rate > 0.0) {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    let first = *waypoints
        .first()
        .ok_or_else(|| Error::invalid("simulation needs at least one waypoint"))?;
    if let Some(p) = waypoints.iter().find(|p| !hm.contains(p.x, p.y)) {
        return Err(Error::OutOfBounds { x: p.x, y: p.y });
    }

    let mut cumulative = vec![0.0];
    for w in waypoints.windows(2) {
        cumulative.push(cumulative.last().unwrap() + w[0].distance(w[1]));
    }
    let total = *cumulative.last().unwrap();
    let v = model.speed_mps;
    let dt = 1.0 / rate;

    let roughness = if model.roughness_coeff > 0.0 {
        Some(roughness_field(hm, model.roughness_window_m)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let noise = Normal::new(0.0, model.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let weight = model.mass_kg * model.gravity;

    let mut samples = Vec::new();
    let emit = |samples: &mut Vec<TelemetrySample>, t: f64, p: Point2, power: f64| -> Result<()> {
        samples.push(TelemetrySample {
            t,
            x: p.x,
            y: p.y,
            z: hm.sample_at(p)?,
            voltage: model.voltage_v,
            current: power / model.voltage_v,
        });
        Ok(())
    };

    if total == 0.0 {
        emit(&mut samples, 0.0, first, model.idle_power_w)?;
        emit(&mut samples, dt, first, model.idle_power_w)?;
        return TelemetryLog::with_rate(samples, rate);
    }

    let ticks = (total / (v * dt) + 1e-9).floor() as usize;
    let mut piece = 0;
    for k in 0..=ticks {
        let s = (k as f64 * v * dt).min(total);
        while piece + 2 < cumulative.len() && s >= cumulative[piece + 1] {
            piece += 1;
        }
        // skip zero-length pieces
        while piece + 2 < cumulative.len() && cumulative[piece + 1] == cumulative[piece] {
            piece += 1;
        }
        let (a, b) = (waypoints[piece], waypoints[piece + 1]);
        let len = cumulative[piece + 1] - cumulative[piece];
        let pos = if len > 0.0 {
            a.lerp(b, ((s - cumulative[piece]) / len).clamp(0.0, 1.0))
        } else {
            a
        };
        let heading = bearing_of(b.x - a.x, b.y - a.y);
        let slope = local_slope(hm, pos, heading);
        let mu = model.mu_field.at(pos.x, pos.y);
        let extra = match &roughness {
            Some(field) => model.roughness_coeff * field.sample_at(pos)?,
            None => 0.0,
        };
        let raw = (mu * weight * slope.cos() + weight * slope.sin() + extra * weight) * v;
        let noisy = if model.noise_sigma > 0.0 {
            raw * (1.0 + noise.sample(&mut rng))
        } else {
            raw
        };
        emit(
            &mut samples,
            k as f64 * dt,
            pos,
            noisy.max(model.idle_power_w),
        )?;
    }
    if samples.len() < 2 {
        // shorter than one tick of travel
        let last = *waypoints.last().unwrap();
        emit(&mut samples, dt, last, model.idle_power_w)?;
    }
    TelemetryLog::with_rate(samples, rate)
}

/// Central-difference slope over ±5 cm, one-sided near the map edge.
fn local_slope(hm: &Heightmap, p: Point2, heading: f64) -> f64 {
    const HALF: f64 = 0.05;
    let back = p.advance(heading, -HALF);
    let ahead = p.advance(heading, HALF);
    match (hm.sample_at(back), hm.sample_at(ahead)) {
        (Ok(hb), Ok(ha)) => (ha - hb).atan2(2.0 * HALF),
        (Err(_), Ok(ha)) => hm.sample_at(p).map(|h| (ha - h).atan2(HALF)).unwrap_or(0.0),
        (Ok(hb), Err(_)) => hm.sample_at(p).map(|h| (h - hb).atan2(HALF)).unwrap_or(0.0),
        _ => 0.0,
    }
}

/// North–south lawn-mower passes across `bounds`, alternating direction.
///
/// Passes are spread evenly from the west edge to the east edge, no further
/// apart than `row_spacing`.
pub fn boustrophedon_waypoints(bounds: Rect, row_spacing: f64) -> Result<Vec<Point2>> {
    if !(row_spacing > 0.0) || row_spacing >= bounds.height() {
        return Err(Error::invalid(format!(
            "row spacing {row_spacing} must be positive and below the bounds height {}",
            bounds.height()
        )));
    }
    if !(bounds.width() >= 0.0) {
        return Err(Error::invalid("bounds have negative width"));
    }
    let intervals = (bounds.width() / row_spacing - 1e-9).ceil().max(0.0) as usize;
    let passes = intervals + 1;
    let step = if intervals == 0 {
        0.0
    } else {
        bounds.width() / intervals as f64
    };
    let mut out = Vec::with_capacity(2 * passes);
    for k in 0..passes {
        let x = if k == intervals {
            bounds.max_x
        } else {
            bounds.min_x + k as f64 * step
        };
        let (y0, y1) = if k % 2 == 0 {
            (bounds.min_y, bounds.max_y)
        } else {
            (bounds.max_y, bounds.min_y)
        };
        out.push(Point2::new(x, y0));
        out.push(Point2::new(x, y1));
    }
    Ok(out)
}

/// `k` uniform random points in `bounds`.
pub fn random_waypoints(bounds: Rect, k: usize, seed: u64) -> Result<Vec<Point2>> {
    if k == 0 {
        return Err(Error::invalid("need at least one waypoint"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| {
            Point2::new(
                rng.random_range(bounds.min_x..=bounds.max_x),
                rng.random_range(bounds.min_y..=bounds.max_y),
            )
        })
        .collect())
}
