//! End-to-end runs on synthetic worlds: generate, drive, segment, split,
//! fit or train, and evaluate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, split_indices_within, Axis, EvalReport, DEFAULT_EPSILON_FLOOR};
use crate::geom::Rect;
use crate::learned::{train, Dataset, ModelConfig, PatchRegressor, TrainConfig, TrainReport};
use crate::patch::{patch_for_segment, HeightPatch};
use crate::physics::{
    fit_friction_segments, rolling_fit_predict, PhysicsParams, DEFAULT_ROLLING_WINDOW_M,
};
use crate::synthworld::{
    boustrophedon_waypoints, generate_terrain, random_waypoints, simulate_run, GroundTruthModel,
    MuField, TerrainSpec,
};
use crate::telemetry::{
    scale_energy, segment_trajectory_with, PathSegment, SegmentOptions, TelemetryLog,
    DEFAULT_RATE_HZ,
};
use crate::terrain::Heightmap;

/// Terrain plus the oracle that drives over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub terrain: TerrainSpec,
    pub oracle: GroundTruthModel,
}

impl WorldConfig {
    /// Gentle grass: friction varies little and patches of rough ground
    /// drive most of the energy variation.
    pub fn grass(seed: u64) -> Self {
        WorldConfig {
            terrain: TerrainSpec {
                roughness_amp_m: 0.03,
                roughness_patch_scale_m: 12.0,
                ..TerrainSpec::site(seed)
            },
            oracle: GroundTruthModel {
                mu_field: MuField {
                    mean: 0.15,
                    amplitude: 0.015,
                    scale_m: 25.0,
                    seed: seed.wrapping_add(1),
                },
                roughness_coeff: 12.0,
                seed: seed.wrapping_add(2),
                ..GroundTruthModel::default()
            },
        }
    }

    /// A second terrain class: higher friction and a stronger response to
    /// roughness.
    pub fn dirt(seed: u64) -> Self {
        let mut w = WorldConfig::grass(seed);
        w.oracle.mu_field.mean = 0.20;
        w.oracle.roughness_coeff = 24.0;
        w
    }

    pub fn build(&self) -> Result<Site> {
        self.oracle.validate()?;
        Ok(Site {
            hm: generate_terrain(&self.terrain)?,
            oracle: self.oracle.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Site {
    pub hm: Heightmap,
    pub oracle: GroundTruthModel,
}

impl Site {
    /// Sampling bounds shrunk by `margin` on every side.
    pub fn drive_bounds(&self, margin: f64) -> Result<Rect> {
        let r = self.hm.sample_bounds().inset(margin);
        if !(r.width() > 0.0 && r.height() > 0.0) {
            return Err(Error::invalid(format!(
                "margin {margin} leaves no drivable area"
            )));
        }
        Ok(r)
    }

    pub fn physics_template(&self) -> PhysicsParams {
        PhysicsParams {
            mu: self.oracle.mu_field.mean,
            mass: self.oracle.mass_kg,
            gravity: self.oracle.gravity,
            speed: self.oracle.speed_mps,
        }
    }
}

fn default_margin() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionPlan {
    Boustrophedon {
        spacing_m: f64,
        #[serde(default = "default_margin")]
        margin_m: f64,
    },
    Random {
        k: usize,
        seed: u64,
        #[serde(default = "default_margin")]
        margin_m: f64,
    },
}

impl MotionPlan {
    pub fn waypoints(&self, site: &Site) -> Result<Vec<crate::geom::Point2>> {
        match *self {
            MotionPlan::Boustrophedon {
                spacing_m,
                margin_m,
            } => boustrophedon_waypoints(site.drive_bounds(margin_m)?, spacing_m),
            MotionPlan::Random { k, seed, margin_m } => {
                random_waypoints(site.drive_bounds(margin_m)?, k, seed)
            }
        }
    }
}

/// Segments from one drive, with what was dropped along the way.
#[derive(Debug, Clone)]
pub struct Drive {
    pub log: TelemetryLog,
    /// Straight segments whose patch lies on the map, in driving order.
    pub segments: Vec<PathSegment>,
    pub n_curved: usize,
    pub n_off_map: usize,
}

pub fn drive(site: &Site, plan: &MotionPlan) -> Result<Drive> {
    let waypoints = plan.waypoints(site)?;
    let log = simulate_run(&site.hm, &site.oracle, &waypoints, DEFAULT_RATE_HZ)?;
    let all = segment_trajectory_with(&log, &SegmentOptions::default())?;
    let n_curved = all.iter().filter(|s| s.curved).count();
    let straight: Vec<PathSegment> = all
        .into_iter()
        .filter(|s| !s.curved)
        .map(|s| s.segment)
        .collect();
    let before = straight.len();
    let segments: Vec<PathSegment> = straight
        .into_iter()
        .filter(|s| patch_for_segment(&site.hm, s, 2).is_ok())
        .collect();
    Ok(Drive {
        log,
        n_off_map: before - segments.len(),
        segments,
        n_curved,
    })
}

pub fn patches_for(hm: &Heightmap, segments: &[PathSegment], n: usize) -> Result<Vec<HeightPatch>> {
    segments
        .iter()
        .map(|s| patch_for_segment(hm, s, n))
        .collect()
}

pub fn dataset_for(hm: &Heightmap, segments: &[PathSegment], n: usize) -> Result<Dataset> {
    Dataset::new(patches_for(hm, segments, n)?, truths(segments))
}

/// Scaled ground-truth energies.
pub fn truths(segments: &[PathSegment]) -> Vec<f64> {
    segments.iter().map(|s| s.energy_scaled).collect()
}

/// Scaled physics predictions from each segment's measured slope.
pub fn physics_predictions(params: &PhysicsParams, segments: &[PathSegment]) -> Vec<f64> {
    segments
        .iter()
        .map(|s| scale_energy(params.predict_energy(s.slope(), s.length_h)))
        .collect()
}

pub fn learned_predictions(
    model: &PatchRegressor,
    hm: &Heightmap,
    segments: &[PathSegment],
) -> Result<Vec<f64>> {
    model.predict_many(&patches_for(hm, segments, model.input_n())?)
}

/// Train/test split of a drive by position along `axis`, relative to the
/// site's sampling extent.
pub fn split_drive(
    site: &Site,
    segments: &[PathSegment],
    axis: Axis,
    fraction: f64,
) -> Result<(Vec<PathSegment>, Vec<PathSegment>)> {
    let b = site.hm.sample_bounds();
    let extent = match axis {
        Axis::X => (b.min_x, b.max_x),
        Axis::Y => (b.min_y, b.max_y),
    };
    let (tr, te) = split_indices_within(segments, axis, fraction, extent)?;
    Ok((
        tr.into_iter().map(|i| segments[i]).collect(),
        te.into_iter().map(|i| segments[i]).collect(),
    ))
}

fn default_fraction() -> f64 {
    1.0 / 3.0
}
fn default_axis() -> Axis {
    Axis::X
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_axis")]
    pub axis: Axis,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            axis: default_axis(),
            fraction: default_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// One friction coefficient fit on the training region.
    Physics,
    /// Friction refit on each five-meter block, predicting the next.
    Rolling,
    Learned,
}

fn default_predictors() -> Vec<PredictorKind> {
    vec![
        PredictorKind::Physics,
        PredictorKind::Rolling,
        PredictorKind::Learned,
    ]
}

/// A complete, seeded experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub world: WorldConfig,
    pub motion: MotionPlan,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<PredictorKind>,
    /// Where `repro` writes unless overridden on the command line.
    pub output_dir: String,
}

/// Mean error of one predictor on the held-out region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub predictor: PredictorKind,
    pub mean_rel_error: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

impl PredictorSummary {
    fn new(predictor: PredictorKind, r: &EvalReport) -> Self {
        PredictorSummary {
            predictor,
            mean_rel_error: r.mean_rel_error,
            n_used: r.n_used,
            n_excluded: r.n_excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub n_segments: usize,
    pub n_curved_excluded: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub fitted_mu: f64,
    pub final_train_loss: Option<f64>,
    pub results: Vec<PredictorSummary>,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub test_segments: Vec<PathSegment>,
    /// Per predictor, predictions aligned with `test_segments`.
    pub predictions: Vec<(PredictorKind, Vec<f64>)>,
    pub model: Option<(PatchRegressor, TrainReport)>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    if cfg.predictors.is_empty() {
        return Err(Error::invalid("scenario lists no predictors"));
    }
    let site = cfg.world.build()?;
    let run = drive(&site, &cfg.motion)?;
    let (train_segs, test_segs) =
        split_drive(&site, &run.segments, cfg.split.axis, cfg.split.fraction)?;
    let template = site.physics_template();
    let fit = fit_friction_segments(&train_segs, template.mass, template.gravity)?;
    let truth = truths(&test_segs);

    let mut predictions = Vec::new();
    let mut model = None;
    for &kind in &cfg.predictors {
        let preds = match kind {
            PredictorKind::Physics => physics_predictions(&template.with_mu(fit.mu), &test_segs),
            PredictorKind::Rolling => {
                // the first block has no history; predict it with the global fit
                let rolling = rolling_fit_predict(&test_segs, DEFAULT_ROLLING_WINDOW_M, &template)?;
                let head = test_segs.len() - rolling.len();
                let mut p = physics_predictions(&template.with_mu(fit.mu), &test_segs[..head]);
                p.extend(rolling.iter().map(|r| scale_energy(r.predicted_j)));
                p
            }
            PredictorKind::Learned => {
                let data = dataset_for(&site.hm, &train_segs, cfg.model.input_n)?;
                let (reg, report) = train(&data, &cfg.model, &cfg.train)?;
                let p = learned_predictions(&reg, &site.hm, &test_segs)?;
                model = Some((reg, report));
                p
            }
        };
        predictions.push((kind, preds));
    }
    let results = predictions
        .iter()
        .map(|(k, p)| {
            evaluate(p, &truth, DEFAULT_EPSILON_FLOOR).map(|r| PredictorSummary::new(*k, &r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioOutcome {
        report: ScenarioReport {
            name: cfg.name.clone(),
            n_segments: run.segments.len(),
            n_curved_excluded: run.n_curved,
            n_train: train_segs.len(),
            n_test: test_segs.len(),
            fitted_mu: fit.mu,
            final_train_loss: model
                .as_ref()
                .and_then(|(_, r): &(PatchRegressor, TrainReport)| r.final_loss()),
            results,
        },
        test_segments: test_segs,
        predictions,
        model,
    })
}
