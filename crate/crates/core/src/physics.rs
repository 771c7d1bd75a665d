//! Friction-plus-gravity energy model and its least-squares fits.
//!
//! The energy to move `d` meters (horizontal) up a slope `θ` is
//! `(μ·m·g·cos θ + m·g·sin θ)·d`. Only the product `μ·m·g` is identifiable
//! from energy data, so the assumed mass cancels out of fit-then-predict.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{PathSegment, DEFAULT_UNIT_LENGTH};

pub const STANDARD_GRAVITY: f64 = 9.80665;
pub const DEFAULT_MASS_KG: f64 = 20.0;
pub const DEFAULT_SPEED: f64 = 0.5;
pub const DEFAULT_ROLLING_WINDOW_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub mu: f64,
    pub mass: f64,
    pub gravity: f64,
    pub speed: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            mu: 0.1,
            mass: DEFAULT_MASS_KG,
            gravity: STANDARD_GRAVITY,
            speed: DEFAULT_SPEED,
        }
    }
}

impl PhysicsParams {
    pub fn new(mu: f64, mass: f64, gravity: f64) -> Result<Self> {
        let params = PhysicsParams {
            mu,
            mass,
            gravity,
            speed: DEFAULT_SPEED,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_mu(self, mu: f64) -> Self {
        PhysicsParams { mu, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("friction coefficient must be finite"));
        }
        if !(self.mass > 0.0 && self.gravity > 0.0 && self.speed > 0.0) {
            return Err(Error::invalid(format!(
                "mass, gravity and speed must be positive (got {}, {}, {})",
                self.mass, self.gravity, self.speed
            )));
        }
        Ok(())
    }

    /// Joules to travel `d` horizontal meters at slope angle `slope`.
    /// Steep descents yield negative values, which are returned as-is.
    pub fn predict_energy(&self, slope: f64, d: f64) -> f64 {
        debug_assert!(d > 0.0 && slope.abs() < std::f64::consts::FRAC_PI_2);
        let weight = self.mass * self.gravity;
        (self.mu * weight * slope.cos() + weight * slope.sin()) * d
    }
}

/// One energy measurement over a straight stretch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub slope: f64,
    pub distance: f64,
    pub energy_j: f64,
}

impl From<&PathSegment> for Observation {
    fn from(seg: &PathSegment) -> Self {
        Observation {
            slope: seg.slope(),
            distance: seg.length_h,
            energy_j: seg.energy_j,
        }
    }
}

/// Result of a friction fit, serialized as the `mu.json` report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionFit {
    pub mu: f64,
    /// Residual sum of squares in J².
    pub rss: f64,
    pub n: usize,
    pub mass_kg: f64,
    pub gravity: f64,
}

impl FrictionFit {
    pub fn params(&self) -> PhysicsParams {
        PhysicsParams {
            mu: self.mu,
            mass: self.mass_kg,
            gravity: self.gravity,
            speed: DEFAULT_SPEED,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Sum of squared residuals of `observations` under friction `mu`.
pub fn residual_sum_of_squares(
    observations: &[Observation],
    mu: f64,
    mass: f64,
    gravity: f64,
) -> f64 {
    let params = PhysicsParams {
        mu,
        mass,
        gravity,
        speed: DEFAULT_SPEED,
    };
    observations
        .iter()
        .map(|o| {
            let r = o.energy_j - params.predict_energy(o.slope, o.distance);
            r * r
        })
        .sum()
}

/// Closed-form least-squares friction coefficient.
///
/// With `cᵢ = m·g·cos θᵢ·dᵢ` and `sᵢ = m·g·sin θᵢ·dᵢ`, returns
/// `Σ cᵢ(Eᵢ − sᵢ) / Σ cᵢ²`.
pub fn fit_friction(observations: &[Observation], mass: f64, gravity: f64) -> Result<FrictionFit> {
    if observations.is_empty() {
        return Err(Error::invalid(
            "friction fit needs at least one observation",
        ));
    }
    if !(mass > 0.0 && gravity > 0.0) {
        return Err(Error::invalid("mass and gravity must be positive"));
    }
    let weight = mass * gravity;
    let (mut num, mut den) = (0.0, 0.0);
    for o in observations {
        let c = weight * o.slope.cos() * o.distance;
        let s = weight * o.slope.sin() * o.distance;
        num += c * (o.energy_j - s);
        den += c * c;
    }
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::invalid(
            "degenerate friction design (sum of c² is zero)",
        ));
    }
    let mu = num / den;
    Ok(FrictionFit {
        mu,
        rss: residual_sum_of_squares(observations, mu, mass, gravity),
        n: observations.len(),
        mass_kg: mass,
        gravity,
    })
}

pub fn fit_friction_segments(
    segments: &[PathSegment],
    mass: f64,
    gravity: f64,
) -> Result<FrictionFit> {
    let obs: Vec<Observation> = segments.iter().map(Observation::from).collect();
    fit_friction(&obs, mass, gravity)
}

/// A prediction paired with the measured energy, both in joules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingPrediction {
    pub predicted_j: f64,
    pub actual_j: f64,
}

/// Fits μ on each block of consecutive segments and predicts the next block.
///
/// Blocks hold `⌈window_m / unit_length⌉` segments; a trailing partial block
/// is still predicted but never used for fitting. Pairs are returned for
/// every block after the first.
pub fn rolling_fit_predict(
    segments: &[PathSegment],
    window_m: f64,
    template: &PhysicsParams,
) -> Result<Vec<RollingPrediction>> {
    template.validate()?;
    if !(window_m > 0.0) {
        return Err(Error::invalid(format!(
            "window must be positive, got {window_m}"
        )));
    }
    let block = (window_m / DEFAULT_UNIT_LENGTH - 1e-9).ceil().max(1.0) as usize;
    if segments.len() < 2 * block {
        return Err(Error::invalid(format!(
            "rolling fit needs at least {} segments, got {}",
            2 * block,
            segments.len()
        )));
    }
    let blocks: Vec<&[PathSegment]> = segments.chunks(block).collect();
    let mut out = Vec::with_capacity(segments.len() - block);
    for pair in blocks.windows(2) {
        let fit = fit_friction_segments(pair[0], template.mass, template.gravity)?;
        let params = template.with_mu(fit.mu);
        out.extend(pair[1].iter().map(|s| RollingPrediction {
            predicted_j: params.predict_energy(s.slope(), s.length_h),
            actual_j: s.energy_j,
        }));
    }
    Ok(out)
}
