//! Telemetry logs, energy integration and unit-length segmentation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bearing_of, Point2, Point3};

/// Nominal battery voltage used to scale energies into network targets.
pub const NOMINAL_VOLTAGE: f64 = 28.8;
pub const DEFAULT_RATE_HZ: f64 = 10.0;
pub const DEFAULT_UNIT_LENGTH: f64 = 1.0;
/// Sample gaps longer than this abort the segment in progress.
pub const DEFAULT_MAX_GAP_S: f64 = 0.5;
/// Segments whose samples stray further than this from their chord are curved.
pub const DEFAULT_MAX_DEVIATION_M: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(rename = "z_m")]
    pub z: f64,
    #[serde(rename = "voltage_v")]
    pub voltage: f64,
    #[serde(rename = "current_a")]
    pub current: f64,
}

impl TelemetrySample {
    pub fn power(&self) -> f64 {
        self.voltage * self.current
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }
}

/// A time-ordered telemetry recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryLog {
    samples: Vec<TelemetrySample>,
    nominal_rate: f64,
}

impl TelemetryLog {
    pub fn new(samples: Vec<TelemetrySample>) -> Result<Self> {
        Self::with_rate(samples, DEFAULT_RATE_HZ)
    }

    pub fn with_rate(samples: Vec<TelemetrySample>, nominal_rate: f64) -> Result<Self> {
        if !(nominal_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {nominal_rate}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample {i} has a non-finite time or position"
                )));
            }
            if !(s.voltage >= 0.0) || !s.current.is_finite() {
                return Err(Error::invalid(format!(
                    "sample {i} has invalid voltage/current"
                )));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "timestamps must strictly increase (sample {})",
                i + 1
            )));
        }
        Ok(TelemetryLog {
            samples,
            nominal_rate,
        })
    }

    pub fn samples(&self) -> &[TelemetrySample] {
        &self.samples
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Total horizontal path length of the recorded positions.
    pub fn horizontal_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Instantaneous power at `t`, linear between samples.
    fn power_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let i = s.partition_point(|x| x.t < t);
        if i == 0 {
            return s[0].power();
        }
        if i == s.len() {
            return s[s.len() - 1].power();
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let w = (t - a.t) / (b.t - a.t);
        a.power() + w * (b.power() - a.power())
    }

    /// Energy in joules drawn over `[t0, t1]`: trapezoidal integration of
    /// `V·I`, with the power series linearly interpolated at the interval ends.
    pub fn integrate_energy(&self, t0: f64, t1: f64) -> Result<f64> {
        if self.samples.len() < 2 {
            return Err(Error::invalid(
                "energy integration needs at least 2 samples",
            ));
        }
        if !(t0 < t1) {
            return Err(Error::invalid(format!(
                "empty integration interval [{t0}, {t1}]"
            )));
        }
        let (start, end) = self.time_span().expect("non-empty");
        if t0 < start || t1 > end {
            return Err(Error::invalid(format!(
                "interval [{t0}, {t1}] outside log span [{start}, {end}]"
            )));
        }
        let s = &self.samples;
        // samples strictly inside (t0, t1)
        let first = s.partition_point(|x| x.t <= t0);
        let last = s.partition_point(|x| x.t < t1);

        let mut energy = 0.0;
        let mut prev_t = t0;
        let mut prev_p = self.power_at(t0);
        for sample in &s[first..last] {
            let p = sample.power();
            energy += 0.5 * (prev_p + p) * (sample.t - prev_t);
            prev_t = sample.t;
            prev_p = p;
        }
        energy += 0.5 * (prev_p + self.power_at(t1)) * (t1 - prev_t);
        Ok(energy)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        check_header(&mut rdr, &TELEMETRY_HEADER)?;
        let samples = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<TelemetrySample>, _>>()?;
        TelemetryLog::new(samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        if self.samples.is_empty() {
            wtr.write_record(TELEMETRY_HEADER)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

pub const TELEMETRY_HEADER: [&str; 6] = ["t_s", "x_m", "y_m", "z_m", "voltage_v", "current_a"];
pub const SEGMENT_HEADER: [&str; 10] = [
    "px",
    "py",
    "pz",
    "qx",
    "qy",
    "qz",
    "heading_rad",
    "length_m",
    "energy_j",
    "energy_scaled",
];

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::invalid(format!(
            "unexpected CSV header {:?}, expected {}",
            headers.iter().collect::<Vec<_>>(),
            expected.join(",")
        )));
    }
    Ok(())
}

pub fn scale_energy(energy_j: f64) -> f64 {
    energy_j / NOMINAL_VOLTAGE
}

/// A chord of the trajectory whose horizontal projection has unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub p: Point3,
    pub q: Point3,
    /// Bearing of `q − p` in the horizontal plane.
    pub heading: f64,
    pub length_h: f64,
    pub energy_j: f64,
    pub energy_scaled: f64,
}

impl PathSegment {
    /// Builds a segment between two points; heading and length are derived.
    pub fn between(p: Point3, q: Point3, energy_j: f64) -> Self {
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        PathSegment {
            p,
            q,
            heading: bearing_of(dx, dy),
            length_h: dx.hypot(dy),
            energy_j,
            energy_scaled: scale_energy(energy_j),
        }
    }

    /// Slope angle from endpoint altitudes.
    pub fn slope(&self) -> f64 {
        (self.q.z - self.p.z).atan2(self.length_h)
    }

    pub fn midpoint(&self) -> Point2 {
        self.p.xy().lerp(self.q.xy(), 0.5)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRow {
    px: f64,
    py: f64,
    pz: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    heading_rad: f64,
    length_m: f64,
    energy_j: f64,
    energy_scaled: f64,
}

pub fn write_segments_csv<W: Write>(segments: &[PathSegment], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in segments {
        wtr.serialize(SegmentRow {
            px: s.p.x,
            py: s.p.y,
            pz: s.p.z,
            qx: s.q.x,
            qy: s.q.y,
            qz: s.q.z,
            heading_rad: s.heading,
            length_m: s.length_h,
            energy_j: s.energy_j,
            energy_scaled: s.energy_scaled,
        })?;
    }
    if segments.is_empty() {
        wtr.write_record(SEGMENT_HEADER)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_segments_csv<R: Read>(reader: R) -> Result<Vec<PathSegment>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &SEGMENT_HEADER)?;
    rdr.deserialize()
        .map(|row| {
            let r: SegmentRow = row?;
            Ok(PathSegment {
                p: Point3::new(r.px, r.py, r.pz),
                q: Point3::new(r.qx, r.qy, r.qz),
                heading: r.heading_rad,
                length_h: r.length_m,
                energy_j: r.energy_j,
                energy_scaled: r.energy_scaled,
            })
        })
        .collect()
}

pub fn save_segments(segments: &[PathSegment], path: &Path) -> Result<()> {
    write_segments_csv(
        segments,
        std::io::BufWriter::new(std::fs::File::create(path)?),
    )
}

pub fn load_segments(path: &Path) -> Result<Vec<PathSegment>> {
    read_segments_csv(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOptions {
    pub unit_length: f64,
    pub max_gap_s: f64,
    pub max_deviation_m: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            unit_length: DEFAULT_UNIT_LENGTH,
            max_gap_s: DEFAULT_MAX_GAP_S,
            max_deviation_m: DEFAULT_MAX_DEVIATION_M,
        }
    }
}

/// A segment together with where it came from in the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySegment {
    pub segment: PathSegment,
    pub t_start: f64,
    pub t_end: f64,
    /// Largest horizontal distance of an interior sample from the chord.
    pub max_deviation: f64,
    pub curved: bool,
}

/// Cuts the trajectory into chords of horizontal length `unit_length`.
pub fn segment_trajectory(log: &TelemetryLog, unit_length: f64) -> Result<Vec<PathSegment>> {
    let opts = SegmentOptions {
        unit_length,
        ..SegmentOptions::default()
    };
    Ok(segment_trajectory_with(log, &opts)?
        .into_iter()
        .map(|s| s.segment)
        .collect())
}

/// Walks the log and emits a segment whenever the horizontal chord from the
/// last cut point reaches `unit_length`. The cut is placed by linear
/// interpolation between samples; the tail shorter than one unit is dropped
/// and a sample gap longer than `max_gap_s` restarts the chord.
pub fn segment_trajectory_with(
    log: &TelemetryLog,
    opts: &SegmentOptions,
) -> Result<Vec<TrajectorySegment>> {
    let unit = opts.unit_length;
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(Error::invalid(format!(
            "unit length must be positive, got {unit}"
        )));
    }
    let s = log.samples();
    if s.len() < 2 {
        return Err(Error::invalid("segmentation needs at least 2 samples"));
    }

    struct Cut {
        pos: Point3,
        t: f64,
    }

    let mut out = Vec::new();
    let mut cut = Cut {
        pos: s[0].position(),
        t: s[0].t,
    };
    let mut interior: Vec<Point2> = Vec::new();

    for w in s.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.t - a.t > opts.max_gap_s {
            cut = Cut {
                pos: b.position(),
                t: b.t,
            };
            interior.clear();
            continue;
        }
        let (ax, ay) = (a.x, a.y);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut frac = 0.0;
        loop {
            let (cx, cy) = (cut.pos.x, cut.pos.y);
            if (b.x - cx).hypot(b.y - cy) < unit - 1e-12 {
                break;
            }
            // |a + α(b − a) − c|² = unit², larger root
            let (ex, ey) = (ax - cx, ay - cy);
            let qa = dx * dx + dy * dy;
            let qb = 2.0 * (ex * dx + ey * dy);
            let qc = ex * ex + ey * ey - unit * unit;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let alpha = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(frac, 1.0);

            let pos = Point3::new(
                a.x + alpha * dx,
                a.y + alpha * dy,
                a.z + alpha * (b.z - a.z),
            );
            let t = a.t + alpha * (b.t - a.t);
            let energy = log.integrate_energy(cut.t, t)?;
            let segment = PathSegment::between(cut.pos, pos, energy);
            let max_deviation = interior
                .iter()
                .map(|&p| distance_to_chord(p, cut.pos.xy(), pos.xy()))
                .fold(0.0, f64::max);
            out.push(TrajectorySegment {
                segment,
                t_start: cut.t,
                t_end: t,
                max_deviation,
                curved: max_deviation > opts.max_deviation_m,
            });
            cut = Cut { pos, t };
            interior.clear();
            frac = alpha;
        }
        interior.push(Point2::new(b.x, b.y));
    }
    Ok(out)
}

fn distance_to_chord(p: Point2, a: Point2, b: Point2) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0);
    p.distance(a.lerp(b, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample(t: f64, x: f64, y: f64, v: f64, i: f64) -> TelemetrySample {
        TelemetrySample {
            t,
            x,
            y,
            z: 0.0,
            voltage: v,
            current: i,
        }
    }

    fn east_log(speed: f64, seconds: f64, rate: f64) -> TelemetryLog {
        let n = (seconds * rate).round() as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 / rate;
                sample(t, speed * t, 0.0, 28.8, 2.0)
            })
            .collect();
        TelemetryLog::new(samples).unwrap()
    }

    #[test]
    fn constant_power_energy() {
        let log = east_log(0.5, 10.0, 10.0);
        let e = log.integrate_energy(2.0, 7.0).unwrap();
        assert!((e - 288.0).abs() < 1e-9, "{e}");
    }

    #[test]
    fn ramping_current_energy() {
        let samples = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.1;
                sample(t, 0.0, 0.0, 28.8, 0.2 * t)
            })
            .collect();
        let log = TelemetryLog::new(samples).unwrap();
        let e = log.integrate_energy(0.0, 10.0).unwrap();
        assert!((e - 288.0).abs() < 1e-9, "{e}");
    }

    #[test]
    fn interpolates_between_samples() {
        let log = TelemetryLog::new(vec![
            sample(0.0, 0.0, 0.0, 10.0, 0.0),
            sample(1.0, 0.0, 0.0, 10.0, 2.0),
        ])
        .unwrap();
        // power = 20 t, integral over [0.25, 0.75] = 10 (0.75² − 0.25²) = 5
        let e = log.integrate_energy(0.25, 0.75).unwrap();
        assert!((e - 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_intervals_error() {
        let log = east_log(0.5, 2.0, 10.0);
        assert!(log.integrate_energy(1.0, 1.0).is_err());
        assert!(log.integrate_energy(1.0, 0.5).is_err());
        assert!(log.integrate_energy(-1.0, 1.0).is_err());
        let one = TelemetryLog::new(vec![sample(0.0, 0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert!(one.integrate_energy(0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_monotonic_time() {
        let r = TelemetryLog::new(vec![
            sample(0.0, 0.0, 0.0, 1.0, 1.0),
            sample(0.0, 0.0, 0.0, 1.0, 1.0),
        ]);
        assert!(r.is_err());
        let r = TelemetryLog::new(vec![sample(0.0, 0.0, 0.0, -1.0, 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn straight_east_segments() {
        let log = east_log(0.5, 10.0, 10.0);
        let segs = segment_trajectory(&log, 1.0).unwrap();
        assert_eq!(segs.len(), 5);
        for s in &segs {
            assert!((s.heading - FRAC_PI_2).abs() < 1e-12);
            assert!((s.length_h - 1.0).abs() < 1e-9);
            // 2 s at 57.6 W
            assert!((s.energy_j - 115.2).abs() < 1e-9);
            assert!((s.energy_scaled * NOMINAL_VOLTAGE - s.energy_j).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_log_has_no_segments() {
        let samples = (0..50)
            .map(|k| sample(k as f64 * 0.1, 3.0, 4.0, 28.8, 1.0))
            .collect();
        let log = TelemetryLog::new(samples).unwrap();
        assert!(segment_trajectory(&log, 1.0).unwrap().is_empty());
    }

    #[test]
    fn fast_samples_produce_multiple_cuts_per_interval() {
        let log = TelemetryLog::new(vec![
            sample(0.0, 0.0, 0.0, 10.0, 1.0),
            sample(0.4, 3.5, 0.0, 10.0, 1.0),
        ])
        .unwrap();
        let segs = segment_trajectory_with(&log, &SegmentOptions::default()).unwrap();
        assert_eq!(segs.len(), 3);
        assert!((segs[2].segment.q.x - 3.0).abs() < 1e-12);
        assert!((segs[1].t_start - segs[0].t_end).abs() < 1e-15);
    }

    #[test]
    fn gaps_restart_the_chord() {
        let mut samples: Vec<_> = (0..=10)
            .map(|k| sample(k as f64 * 0.1, k as f64 * 0.05, 0.0, 1.0, 1.0))
            .collect();
        // one-second hole, then keep going
        samples.extend((0..=30).map(|k| {
            let t = 2.0 + k as f64 * 0.1;
            sample(t, 0.5 + k as f64 * 0.05, 0.0, 1.0, 1.0)
        }));
        let log = TelemetryLog::new(samples).unwrap();
        let segs = segment_trajectory_with(&log, &SegmentOptions::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].t_start >= 2.0);
    }

    #[test]
    fn sharp_turn_is_flagged_curved() {
        // 0.8 m east then north: the chord cut lands after the corner
        let mut samples = Vec::new();
        for k in 0..=8 {
            samples.push(sample(k as f64 * 0.1, k as f64 * 0.1, 0.0, 1.0, 1.0));
        }
        for k in 1..=8 {
            samples.push(sample(0.8 + k as f64 * 0.1, 0.8, k as f64 * 0.1, 1.0, 1.0));
        }
        let log = TelemetryLog::new(samples).unwrap();
        let segs = segment_trajectory_with(&log, &SegmentOptions::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].curved, "deviation {}", segs[0].max_deviation);
    }

    #[test]
    fn csv_round_trip() {
        let log = east_log(0.5, 1.0, 10.0);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,x_m,y_m,z_m,voltage_v,current_a\n"));
        assert_eq!(TelemetryLog::read_csv(&buf[..]).unwrap(), log);

        let segs = segment_trajectory(&east_log(0.5, 4.0, 10.0), 1.0).unwrap();
        let mut buf = Vec::new();
        write_segments_csv(&segs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf)
            .starts_with("px,py,pz,qx,qy,qz,heading_rad,length_m,energy_j,energy_scaled\n"));
        assert_eq!(read_segments_csv(&buf[..]).unwrap(), segs);
    }

    #[test]
    fn rejects_wrong_header() {
        let text = "t,x,y,z,v,i\n0,0,0,0,1,1\n";
        assert!(TelemetryLog::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn scaling() {
        assert_eq!(scale_energy(288.0), 10.0);
        assert_eq!(scale_energy(0.0), 0.0);
        assert_eq!(scale_energy(28.8), 1.0);
    }
}
