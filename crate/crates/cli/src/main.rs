use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use terrain_energy::evaluation::{evaluate, DEFAULT_EPSILON_FLOOR};
use terrain_energy::experiment::{
    dataset_for, learned_predictions, physics_predictions, run_scenario, truths, MotionPlan,
    ScenarioConfig, Site,
};
use terrain_energy::geom::Point2;
use terrain_energy::learned::{fine_tune, train, ModelConfig, PatchRegressor, TrainConfig};
use terrain_energy::patch::patch_for_segment;
use terrain_energy::physics::{
    fit_friction_segments, FrictionFit, DEFAULT_MASS_KG, STANDARD_GRAVITY,
};
use terrain_energy::planner::{
    build_cost_map, plan_min_energy, render_plan_svg, DirectionalCostMap, EnergyPredictor,
    PhysicsPredictor, DEFAULT_CELL_SIZE, DEFAULT_NEIGHBORHOOD,
};
use terrain_energy::synthworld::{generate_terrain, simulate_run, GroundTruthModel, TerrainSpec};
use terrain_energy::telemetry::{
    load_segments, save_segments, segment_trajectory_with, PathSegment, SegmentOptions,
    TelemetryLog, DEFAULT_MAX_DEVIATION_M, DEFAULT_MAX_GAP_S, DEFAULT_RATE_HZ, DEFAULT_UNIT_LENGTH,
};
use terrain_energy::terrain::Heightmap;

mod plots;

/// Terrain-aware energy prediction and minimum-energy path planning.
#[derive(Debug, Parser)]
#[command(name = "terrain-energy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic heightmap.
    GenTerrain {
        /// Terrain spec JSON, or a scenario JSON whose world terrain is used.
        #[arg(long)]
        spec: PathBuf,
        /// Directory that receives the heightmap files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Drive the oracle robot over a heightmap and record telemetry.
    Simulate {
        /// Heightmap directory.
        #[arg(long)]
        terrain: PathBuf,
        /// Oracle model JSON, or a scenario JSON whose world oracle is used.
        #[arg(long)]
        model: PathBuf,
        /// Waypoint pattern; defaults to the scenario's motion plan.
        #[arg(long, value_enum)]
        pattern: Option<Pattern>,
        /// Row spacing in meters for the boustrophedon pattern.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        /// Number of waypoints for the random pattern.
        #[arg(long, default_value_t = 60)]
        k: usize,
        /// Seed for the random pattern.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Distance in meters kept from the map edge.
        #[arg(long, default_value_t = 1.5)]
        margin: f64,
        /// Logging rate in Hz.
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
        /// Telemetry CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a telemetry log into unit-length segments.
    Segment {
        /// Telemetry CSV.
        #[arg(long)]
        log: PathBuf,
        /// Heightmap directory; segments whose patch leaves it are dropped.
        #[arg(long)]
        terrain: PathBuf,
        /// Horizontal segment length in meters.
        #[arg(long, default_value_t = DEFAULT_UNIT_LENGTH)]
        unit: f64,
        /// Largest sample offset from the chord before a segment counts as curved.
        #[arg(long, default_value_t = DEFAULT_MAX_DEVIATION_M)]
        max_deviation: f64,
        /// Longest sample gap in seconds before the chord restarts.
        #[arg(long, default_value_t = DEFAULT_MAX_GAP_S)]
        max_gap: f64,
        /// Keep segments that follow a turn.
        #[arg(long)]
        keep_curved: bool,
        /// Segment CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the friction coefficient of the physics baseline.
    FitPhysics {
        /// Segment CSV.
        #[arg(long)]
        segments: PathBuf,
        /// Robot mass in kg.
        #[arg(long, default_value_t = DEFAULT_MASS_KG)]
        mass: f64,
        /// Gravitational acceleration in m/s².
        #[arg(long, default_value_t = STANDARD_GRAVITY)]
        gravity: f64,
        /// Fit report JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a patch regressor from scratch.
    Train {
        #[command(flatten)]
        data: TrainData,
        /// Network architecture JSON; the default architecture if omitted.
        #[arg(long)]
        model_config: Option<PathBuf>,
        /// Model file to write; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue training an existing model with every layer trainable.
    FineTune {
        /// Model to start from.
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        data: TrainData,
        /// Model file to write; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict scaled energy for each segment.
    Predict {
        /// `learned:model.bin`, `physics:mu.json`, or a bare model path.
        #[arg(long, value_parser = parse_predictor)]
        model: PredictorArg,
        /// Heightmap directory.
        #[arg(long)]
        terrain: PathBuf,
        /// Segment CSV.
        #[arg(long)]
        segments: PathBuf,
        /// Prediction CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a directional energy-cost map.
    BuildMap {
        /// Heightmap directory.
        #[arg(long)]
        terrain: PathBuf,
        /// `physics:mu.json` or `learned:model.bin`.
        #[arg(long, value_parser = parse_predictor)]
        predictor: PredictorArg,
        /// Cost-map cell size in meters.
        #[arg(long, default_value_t = DEFAULT_CELL_SIZE)]
        cell_size: f64,
        /// 4, 8 or 16 neighbors per cell.
        #[arg(long, default_value_t = DEFAULT_NEIGHBORHOOD)]
        neighborhood: usize,
        /// Directory that receives the cost map.
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan a minimum-energy path over a cost map.
    Plan {
        /// Cost-map directory.
        #[arg(long)]
        costmap: PathBuf,
        /// Start point `x,y` in meters.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: Point2,
        /// Goal point `x,y` in meters.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        goal: Point2,
        /// Plan CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Also render the path over shaded relief to this SVG.
        #[arg(long, requires = "terrain")]
        svg: Option<PathBuf>,
        /// Heightmap directory used for the SVG background.
        #[arg(long)]
        terrain: Option<PathBuf>,
    },
    /// Score predictions against segment energies.
    Evaluate {
        /// Prediction CSV from `predict`.
        #[arg(long)]
        preds: PathBuf,
        /// Segment CSV the predictions belong to.
        #[arg(long)]
        segments: PathBuf,
        /// Segments with scaled energy below this are excluded.
        #[arg(long, default_value_t = DEFAULT_EPSILON_FLOOR)]
        floor: f64,
        /// Report JSON to write; per-segment rows go to `<stem>_segments.csv` beside it.
        #[arg(long)]
        out: PathBuf,
        /// Also plot predictions against truth to this SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a whole scenario and print its summary table.
    Repro {
        /// Scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct TrainData {
    /// Segment CSV.
    #[arg(long)]
    segments: PathBuf,
    /// Heightmap directory the segments were driven on.
    #[arg(long)]
    terrain: PathBuf,
    /// Training hyperparameters JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Pattern {
    Boustrophedon,
    Random,
}

#[derive(Debug, Clone)]
enum PredictorArg {
    Physics(PathBuf),
    Learned(PathBuf),
}

enum Predictor {
    Physics(FrictionFit),
    Learned(PatchRegressor),
}

impl PredictorArg {
    fn load(&self) -> Result<Predictor> {
        Ok(match self {
            PredictorArg::Physics(p) => Predictor::Physics(FrictionFit::load(existing(p)?)?),
            PredictorArg::Learned(p) => Predictor::Learned(PatchRegressor::load(existing(p)?)?),
        })
    }
}

fn parse_predictor(s: &str) -> std::result::Result<PredictorArg, String> {
    match s.split_once(':') {
        Some(("physics", p)) => Ok(PredictorArg::Physics(p.into())),
        Some(("learned", p)) => Ok(PredictorArg::Learned(p.into())),
        Some((kind, _)) if !kind.contains(['/', '\\', '.']) => Err(format!(
            "unknown predictor kind `{kind}`; expected physics or learned"
        )),
        _ => Ok(PredictorArg::Learned(s.into())),
    }
}

fn parse_point(s: &str) -> std::result::Result<Point2, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(Point2::new(num(x)?, num(y)?))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(terrain_energy::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<terrain_energy::Error> for CliError {
    fn from(e: terrain_energy::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Missing inputs are the caller's mistake, not a runtime failure.
fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("{} does not exist", path.display())))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(existing(path)?)?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e))
}

fn format_error(path: &Path, e: impl ToString) -> CliError {
    CliError::Core(terrain_energy::Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// A plain document, or a scenario that embeds one.
enum Either<T> {
    Plain(T),
    Scenario(Box<ScenarioConfig>),
}

fn read_or_scenario<T: DeserializeOwned>(path: &Path) -> Result<Either<T>> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("world").is_some() {
        Ok(Either::Scenario(
            serde_json::from_value(value).map_err(|e| format_error(path, e))?,
        ))
    } else {
        Ok(Either::Plain(
            serde_json::from_value(value).map_err(|e| format_error(path, e))?,
        ))
    }
}

fn load_terrain(dir: &Path) -> Result<Heightmap> {
    Ok(Heightmap::load(existing(dir)?)?)
}

fn load_segment_csv(path: &Path) -> Result<Vec<PathSegment>> {
    Ok(load_segments(existing(path)?)?)
}

/// Creates the parent directory of an output file.
fn prepare(file: &Path) -> Result<&Path> {
    if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(file)
}

fn write_predictions(path: &Path, preds: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(prepare(path)?).map_err(terrain_energy::Error::from)?;
    let io = |e: csv::Error| CliError::Core(e.into());
    wtr.write_record(["index", "prediction"]).map_err(io)?;
    for (i, p) in preds.iter().enumerate() {
        wtr.write_record([i.to_string(), p.to_string()])
            .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(existing(path)?).map_err(terrain_energy::Error::from)?;
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<(usize, f64)>().enumerate() {
        let (i, p) = row.map_err(|e| format_error(path, e))?;
        if i != k {
            return Err(format_error(path, format!("row {k} has index {i}")));
        }
        out.push(p);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::GenTerrain { spec, out } => {
            let spec = match read_or_scenario::<TerrainSpec>(&spec)? {
                Either::Plain(s) => s,
                Either::Scenario(s) => s.world.terrain,
            };
            let hm = generate_terrain(&spec)?;
            fs::create_dir_all(&out)?;
            hm.save(&out)?;
            let (w, h) = hm.extent();
            writeln!(
                stdout,
                "wrote {}x{} heightmap ({w} m x {h} m) to {}",
                hm.cols(),
                hm.rows(),
                out.display()
            )?;
        }
        Command::Simulate {
            terrain,
            model,
            pattern,
            spacing,
            k,
            seed,
            margin,
            rate,
            out,
        } => {
            let (oracle, fallback) = match read_or_scenario::<GroundTruthModel>(&model)? {
                Either::Plain(m) => (m, None),
                Either::Scenario(s) => (s.world.oracle, Some(s.motion)),
            };
            let motion = match pattern {
                Some(Pattern::Boustrophedon) => MotionPlan::Boustrophedon {
                    spacing_m: spacing,
                    margin_m: margin,
                },
                Some(Pattern::Random) => MotionPlan::Random {
                    k,
                    seed,
                    margin_m: margin,
                },
                None => fallback
                    .ok_or_else(|| usage("--pattern is required unless --model is a scenario"))?,
            };
            let site = Site {
                hm: load_terrain(&terrain)?,
                oracle,
            };
            let waypoints = motion.waypoints(&site)?;
            let log = simulate_run(&site.hm, &site.oracle, &waypoints, rate)?;
            log.save(prepare(&out)?)?;
            writeln!(
                stdout,
                "wrote {} samples to {}",
                log.samples().len(),
                out.display()
            )?;
        }
        Command::Segment {
            log,
            terrain,
            unit,
            max_deviation,
            max_gap,
            keep_curved,
            out,
        } => {
            let log = TelemetryLog::load(existing(&log)?)?;
            let hm = load_terrain(&terrain)?;
            let opts = SegmentOptions {
                unit_length: unit,
                max_gap_s: max_gap,
                max_deviation_m: max_deviation,
            };
            let all = segment_trajectory_with(&log, &opts)?;
            let n_curved = all.iter().filter(|s| s.curved).count();
            let kept: Vec<PathSegment> = all
                .iter()
                .filter(|s| keep_curved || !s.curved)
                .map(|s| s.segment)
                .collect();
            let before = kept.len();
            let on_map: Vec<PathSegment> = kept
                .into_iter()
                .filter(|s| patch_for_segment(&hm, s, 2).is_ok())
                .collect();
            save_segments(&on_map, prepare(&out)?)?;
            writeln!(
                stdout,
                "wrote {} segments to {} ({} curved{}, {} off map)",
                on_map.len(),
                out.display(),
                n_curved,
                if keep_curved { " kept" } else { " dropped" },
                before - on_map.len()
            )?;
        }
        Command::FitPhysics {
            segments,
            mass,
            gravity,
            out,
        } => {
            let segs = load_segment_csv(&segments)?;
            let fit = fit_friction_segments(&segs, mass, gravity)?;
            fit.save(prepare(&out)?)?;
            writeln!(stdout, "mu = {:.6} from {} segments", fit.mu, fit.n)?;
        }
        Command::Train {
            data,
            model_config,
            out,
        } => {
            let model: ModelConfig = match model_config {
                Some(p) => read_json(&p)?,
                None => ModelConfig::default(),
            };
            let cfg: TrainConfig = read_json(&data.config)?;
            let hm = load_terrain(&data.terrain)?;
            let segs = load_segment_csv(&data.segments)?;
            let (reg, report) = train(&dataset_for(&hm, &segs, model.input_n)?, &model, &cfg)?;
            reg.save(prepare(&out)?, Some(&cfg), Some(&report))?;
            writeln!(
                stdout,
                "trained on {} segments; final loss {:.6}",
                report.n_samples,
                report.final_loss().unwrap_or(f64::NAN)
            )?;
        }
        Command::FineTune { from, data, out } => {
            let base = PatchRegressor::load(existing(&from)?)?;
            let cfg: TrainConfig = read_json(&data.config)?;
            let hm = load_terrain(&data.terrain)?;
            let segs = load_segment_csv(&data.segments)?;
            let (reg, report) = fine_tune(&base, &dataset_for(&hm, &segs, base.input_n())?, &cfg)?;
            reg.save(prepare(&out)?, Some(&cfg), Some(&report))?;
            writeln!(
                stdout,
                "fine-tuned on {} segments; final loss {:.6}",
                report.n_samples,
                report.final_loss().unwrap_or(f64::NAN)
            )?;
        }
        Command::Predict {
            model,
            terrain,
            segments,
            out,
        } => {
            let segs = load_segment_csv(&segments)?;
            let preds = match model.load()? {
                Predictor::Physics(fit) => physics_predictions(&fit.params(), &segs),
                Predictor::Learned(reg) => {
                    learned_predictions(&reg, &load_terrain(&terrain)?, &segs)?
                }
            };
            write_predictions(&out, &preds)?;
            writeln!(
                stdout,
                "wrote {} predictions to {}",
                preds.len(),
                out.display()
            )?;
        }
        Command::BuildMap {
            terrain,
            predictor,
            cell_size,
            neighborhood,
            out,
        } => {
            let hm = load_terrain(&terrain)?;
            let loaded = predictor.load()?;
            let p: &dyn EnergyPredictor = match &loaded {
                Predictor::Physics(fit) => &PhysicsPredictor::new(fit.params()),
                Predictor::Learned(reg) => reg,
            };
            let map = build_cost_map(&hm, p, cell_size, neighborhood)?;
            fs::create_dir_all(&out)?;
            map.save(&out)?;
            writeln!(
                stdout,
                "wrote {}x{} cost map to {}",
                map.rows(),
                map.cols(),
                out.display()
            )?;
        }
        Command::Plan {
            costmap,
            start,
            goal,
            out,
            svg,
            terrain,
        } => {
            let map = DirectionalCostMap::load(existing(&costmap)?)?;
            let cell = |p: Point2| {
                map.cell_of(p)
                    .ok_or(CliError::Core(terrain_energy::Error::OutOfBounds {
                        x: p.x,
                        y: p.y,
                    }))
            };
            let plan = plan_min_energy(&map, cell(start)?, cell(goal)?)?;
            plan.write_csv(&map, fs::File::create(prepare(&out)?)?)?;
            if let (Some(svg), Some(terrain)) = (svg, terrain) {
                let hm = load_terrain(&terrain)?;
                fs::write(prepare(&svg)?, render_plan_svg(&hm, &map, &plan))?;
            }
            writeln!(
                stdout,
                "{} edges, total cost {:.6}, written to {}",
                plan.per_edge.len(),
                plan.total_cost,
                out.display()
            )?;
        }
        Command::Evaluate {
            preds,
            segments,
            floor,
            out,
            svg,
        } => {
            let p = read_predictions(&preds)?;
            let segs = load_segment_csv(&segments)?;
            let t = truths(&segs);
            let report = evaluate(&p, &t, floor)?;
            report.save(prepare(&out)?)?;
            let stem = out.file_stem().unwrap_or_default().to_string_lossy();
            let rows = out.with_file_name(format!("{stem}_segments.csv"));
            report.write_segment_csv(fs::File::create(&rows)?)?;
            if let Some(svg) = svg {
                fs::write(prepare(&svg)?, plots::trace_svg(&t, &[("prediction", &p)]))?;
            }
            writeln!(
                stdout,
                "mean relative error {:.2}% over {} segments ({} excluded)",
                100.0 * report.mean_rel_error,
                report.n_used,
                report.n_excluded
            )?;
        }
        Command::Repro { scenario, out } => {
            let cfg: ScenarioConfig = read_json(&scenario)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let outcome = run_scenario(&cfg)?;
            fs::create_dir_all(&dir)?;
            let mut report = serde_json::to_string_pretty(&outcome.report)
                .map_err(terrain_energy::Error::from)?;
            report.push('\n');
            fs::write(dir.join("report.json"), report)?;
            let truth = truths(&outcome.test_segments);
            write_scenario_predictions(&dir.join("predictions.csv"), &truth, &outcome.predictions)?;
            let series: Vec<(String, &[f64])> = outcome
                .predictions
                .iter()
                .map(|(k, p)| (kind_name(*k), p.as_slice()))
                .collect();
            let series: Vec<(&str, &[f64])> =
                series.iter().map(|(n, p)| (n.as_str(), *p)).collect();
            fs::write(dir.join("traces.svg"), plots::trace_svg(&truth, &series))?;
            if let Some((model, train_report)) = &outcome.model {
                model.save(&dir.join("model.bin"), Some(&cfg.train), Some(train_report))?;
            }
            let r = &outcome.report;
            writeln!(stdout, "scenario {}", r.name)?;
            writeln!(
                stdout,
                "segments {} (train {}, test {}, curved excluded {}), fitted mu {:.4}",
                r.n_segments, r.n_train, r.n_test, r.n_curved_excluded, r.fitted_mu
            )?;
            writeln!(
                stdout,
                "{:<10} {:>10} {:>8} {:>9}",
                "predictor", "mean err", "used", "excluded"
            )?;
            for s in &r.results {
                writeln!(
                    stdout,
                    "{:<10} {:>9.2}% {:>8} {:>9}",
                    kind_name(s.predictor),
                    100.0 * s.mean_rel_error,
                    s.n_used,
                    s.n_excluded
                )?;
            }
            writeln!(stdout, "outputs in {}", dir.display())?;
        }
    }
    Ok(())
}

fn kind_name(kind: terrain_energy::experiment::PredictorKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn write_scenario_predictions(
    path: &Path,
    truth: &[f64],
    predictions: &[(terrain_energy::experiment::PredictorKind, Vec<f64>)],
) -> Result<()> {
    let csv_err = |e: csv::Error| CliError::Core(e.into());
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["index".to_owned(), "truth".to_owned()];
    header.extend(predictions.iter().map(|(k, _)| kind_name(*k)));
    wtr.write_record(&header).map_err(csv_err)?;
    for (i, t) in truth.iter().enumerate() {
        let mut row = vec![i.to_string(), t.to_string()];
        row.extend(predictions.iter().map(|(_, p)| p[i].to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
