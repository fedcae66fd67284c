use std::io::Read;
use std::path::Path;

use log::warn;

use super::QualityTimeSeries;
use crate::error::{Error, Result};
use crate::video_io::FrameAlignment;

/// Loads externally computed per-frame scores (`displayed_frame_index,score`).
pub fn ingest_scores(
    path: impl AsRef<Path>,
    align: &FrameAlignment,
    metric_name: &str,
    higher_is_better: bool,
) -> Result<QualityTimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (series, ignored) = parse_scores(file, align, metric_name, higher_is_better)?;
    if !ignored.is_empty() {
        warn!(
            "{}: ignored {} score rows on stalled frames (first: {})",
            path.display(),
            ignored.len(),
            ignored[0]
        );
    }
    Ok(series)
}

/// Parses a score CSV; also returns the stalled indices whose rows were dropped.
pub fn parse_scores<R: Read>(
    reader: R,
    align: &FrameAlignment,
    metric_name: &str,
    higher_is_better: bool,
) -> Result<(QualityTimeSeries, Vec<usize>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidParameter(format!("score file lacks a {name:?} column")))
    };
    let (idx_col, score_col) = (col("displayed_frame_index")?, col("score")?);

    let mut values: Vec<Option<f64>> = vec![None; align.len()];
    let mut seen = vec![false; align.len()];
    let mut ignored = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw_idx = rec.get(idx_col).unwrap_or("");
        let idx: usize = raw_idx.parse().map_err(|_| Error::BadScore {
            line,
            value: raw_idx.to_string(),
        })?;
        let raw_score = rec.get(score_col).unwrap_or("");
        let score: f64 = raw_score
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::BadScore {
                line,
                value: raw_score.to_string(),
            })?;
        if idx >= align.len() {
            return Err(Error::AlignmentMismatch(format!(
                "score row for displayed frame {idx}, session has {}",
                align.len()
            )));
        }
        if seen[idx] {
            return Err(Error::DuplicateFrame(idx));
        }
        seen[idx] = true;
        if align.entries()[idx].stalled {
            ignored.push(idx);
        } else {
            values[idx] = Some(score);
        }
    }
    if let Some(missing) = align
        .entries()
        .iter()
        .find(|e| !e.stalled && values[e.displayed_index].is_none())
    {
        return Err(Error::MissingFrame(missing.displayed_index));
    }
    let series = QualityTimeSeries::new(metric_name, higher_is_better, values, align.stalled_mask())?;
    Ok((series, ignored))
}
