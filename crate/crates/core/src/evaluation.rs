//! Relative-error metrics and geometric train/test splits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::PathSegment;

/// Ground truths smaller than this (scaled units) are excluded from means.
pub const DEFAULT_EPSILON_FLOOR: f64 = 0.05;

/// `|pred − truth| / |truth|`, refusing truths under the default floor.
pub fn relative_error(pred: f64, truth: f64) -> Result<f64> {
    relative_error_with_floor(pred, truth, DEFAULT_EPSILON_FLOOR)
}

pub fn relative_error_with_floor(pred: f64, truth: f64, epsilon_floor: f64) -> Result<f64> {
    if !(truth.abs() >= epsilon_floor) || truth == 0.0 {
        return Err(Error::invalid(format!(
            "ground truth {truth} is below the error floor {epsilon_floor}"
        )));
    }
    Ok((pred - truth).abs() / truth.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentError {
    pub prediction: f64,
    pub ground_truth: f64,
    /// `None` when the ground truth fell under the floor.
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_rel_error: f64,
    pub n_used: usize,
    pub n_excluded: usize,
    pub epsilon_floor: f64,
    pub per_segment: Vec<SegmentError>,
}

impl EvalReport {
    /// Writes the JSON report.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    /// Writes `index,pred,truth,rel_err,used` rows.
    pub fn write_segment_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "pred", "truth", "rel_err", "used"])?;
        for (i, s) in self.per_segment.iter().enumerate() {
            let rel = s.relative_error.map(|r| r.to_string()).unwrap_or_default();
            wtr.write_record([
                i.to_string(),
                s.prediction.to_string(),
                s.ground_truth.to_string(),
                rel,
                (s.relative_error.is_some() as u8).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mean relative error over all pairs whose truth clears `epsilon_floor`.
pub fn evaluate(
    predictions: &[f64],
    ground_truths: &[f64],
    epsilon_floor: f64,
) -> Result<EvalReport> {
    if predictions.len() != ground_truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground truths",
            predictions.len(),
            ground_truths.len()
        )));
    }
    let per_segment: Vec<SegmentError> = predictions
        .iter()
        .zip(ground_truths)
        .map(|(&prediction, &ground_truth)| SegmentError {
            prediction,
            ground_truth,
            relative_error: relative_error_with_floor(prediction, ground_truth, epsilon_floor).ok(),
        })
        .collect();
    let used: Vec<f64> = per_segment
        .iter()
        .filter_map(|s| s.relative_error)
        .collect();
    if used.is_empty() {
        return Err(Error::invalid("every segment fell below the error floor"));
    }
    Ok(EvalReport {
        mean_rel_error: used.iter().sum::<f64>() / used.len() as f64,
        n_used: used.len(),
        n_excluded: per_segment.len() - used.len(),
        epsilon_floor,
        per_segment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Splits segments by the position of their midpoints: those below
/// `min + fraction·(max − min)` along `axis` train, the rest test.
pub fn split_by_region(
    segments: &[PathSegment],
    axis: Axis,
    fraction: f64,
) -> Result<(Vec<PathSegment>, Vec<PathSegment>)> {
    let (train_idx, test_idx) = split_indices_by_region(segments, axis, fraction)?;
    Ok((
        train_idx.iter().map(|&i| segments[i]).collect(),
        test_idx.iter().map(|&i| segments[i]).collect(),
    ))
}

/// Index form of [`split_by_region`], preserving input order on both sides.
pub fn split_indices_by_region(
    segments: &[PathSegment],
    axis: Axis,
    fraction: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if segments.is_empty() {
        return Err(Error::invalid("cannot split an empty segment set"));
    }
    let (lo, hi) = segments
        .iter()
        .map(|s| axis_coord(s, axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    split_indices_within(segments, axis, fraction, (lo, hi))
}

/// Like [`split_indices_by_region`] but against a known site extent
/// `(lo, hi)` along `axis` rather than the span of the segments.
pub fn split_indices_within(
    segments: &[PathSegment],
    axis: Axis,
    fraction: f64,
    extent: (f64, f64),
) -> Result<(Vec<usize>, Vec<usize>)> {
    if segments.is_empty() {
        return Err(Error::invalid("cannot split an empty segment set"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let boundary = extent.0 + fraction * (extent.1 - extent.0);
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..segments.len()).partition(|&i| axis_coord(&segments[i], axis) < boundary);
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("region split left one side empty"));
    }
    Ok((train, test))
}

fn axis_coord(s: &PathSegment, axis: Axis) -> f64 {
    let m = s.midpoint();
    match axis {
        Axis::X => m.x,
        Axis::Y => m.y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;

    #[test]
    fn relative_error_formula() {
        assert!((relative_error(11.0, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(relative_error(3.7, 3.7).unwrap(), 0.0);
        assert_eq!(relative_error(5.0, 4.0).unwrap(), 0.25);
        assert!(relative_error(1.0, 0.01).is_err());
    }

    #[test]
    fn relative_error_scale_invariant() {
        for k in [0.5, 2.0, 4.0] {
            assert_eq!(
                relative_error(11.0 * k, 10.0 * k).unwrap(),
                relative_error(11.0, 10.0).unwrap()
            );
        }
    }

    #[test]
    fn evaluate_means_and_exclusions() {
        let r = evaluate(&[1.0, 2.0], &[1.0, 2.0], 0.05).unwrap();
        assert_eq!(r.mean_rel_error, 0.0);
        let r = evaluate(&[11.0], &[10.0], 0.05).unwrap();
        assert!((r.mean_rel_error - 0.1).abs() < 1e-15);
        let r = evaluate(&[11.0, 0.5], &[10.0, 0.01], 0.05).unwrap();
        assert_eq!((r.n_used, r.n_excluded), (1, 1));
        assert!(evaluate(&[1.0], &[0.0], 0.05).is_err());
        assert!(evaluate(&[1.0, 2.0], &[1.0], 0.05).is_err());
    }

    #[test]
    fn csv_rows() {
        let r = evaluate(&[11.0, 0.5], &[10.0, 0.01], 0.05).unwrap();
        let mut buf = Vec::new();
        r.write_segment_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,pred,truth,rel_err,used");
        assert!(lines[1].ends_with(",1"));
        assert_eq!(lines[2], "1,0.5,0.01,,0");
    }

    fn seg_at(x: f64) -> PathSegment {
        PathSegment::between(Point3::new(x, 0.0, 0.0), Point3::new(x, 1.0, 0.0), 1.0)
    }

    #[test]
    fn half_split_on_symmetric_data() {
        let segs: Vec<_> = (0..10).map(|i| seg_at(i as f64)).collect();
        let (train, test) = split_by_region(&segs, Axis::X, 0.5).unwrap();
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);
        assert!(train.iter().all(|s| s.p.x < 4.5));
    }

    #[test]
    fn empty_side_is_an_error() {
        let segs = vec![seg_at(1.0), seg_at(1.0)];
        assert!(split_by_region(&segs, Axis::X, 1.0 / 3.0).is_err());
        assert!(split_by_region(&[], Axis::X, 0.5).is_err());
        assert!(split_by_region(&[seg_at(0.0), seg_at(1.0)], Axis::X, 1.5).is_err());
        // everything sits in the left third of a 0..30 m site
        let left: Vec<_> = (0..5).map(|i| seg_at(i as f64)).collect();
        assert!(split_indices_within(&left, Axis::X, 1.0 / 3.0, (0.0, 30.0)).is_err());
    }
}
