//! Full-reference quality kernels and sequence scoring through a frame alignment.

mod gmsd;
mod ingest;
mod psnr;
mod ssim;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gmsd::{gmsd_frame, gmsd_frame_with, GmsdConfig};
pub use ingest::{ingest_scores, parse_scores};
pub use psnr::{mse, psnr_frame, psnr_from_mse, PSNR_CAP_DB};
pub use ssim::{gaussian_window, msssim_frame, msssim_frame_with, ssim_frame, MsSsimConfig, MSSSIM_WEIGHTS};

use crate::error::{Error, Result};
use crate::video_io::{FrameAlignment, FrameSequence, LumaPlane};

/// Per-displayed-frame quality with the stall mask; stalled frames carry no score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityTimeSeries {
    pub metric_name: String,
    pub higher_is_better: bool,
    values: Vec<Option<f64>>,
    stalled: Vec<bool>,
}

impl QualityTimeSeries {
    pub fn new(
        metric_name: impl Into<String>,
        higher_is_better: bool,
        values: Vec<Option<f64>>,
        stalled: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != stalled.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} stall flags",
                values.len(),
                stalled.len()
            )));
        }
        for (i, (v, &s)) in values.iter().zip(&stalled).enumerate() {
            if !s && !v.is_some_and(f64::is_finite) {
                return Err(Error::InvalidParameter(format!(
                    "played frame {i} has no finite score"
                )));
            }
        }
        let values = values
            .into_iter()
            .zip(&stalled)
            .map(|(v, &s)| if s { None } else { v })
            .collect();
        Ok(QualityTimeSeries {
            metric_name: metric_name.into(),
            higher_is_better,
            values,
            stalled,
        })
    }

    /// A series with no stalls.
    pub fn from_scores(metric_name: impl Into<String>, higher_is_better: bool, scores: &[f64]) -> Result<Self> {
        Self::new(
            metric_name,
            higher_is_better,
            scores.iter().copied().map(Some).collect(),
            vec![false; scores.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn stalled(&self) -> &[bool] {
        &self.stalled
    }

    /// Scores of the played frames in display order, stall gaps closed.
    pub fn played(&self) -> Vec<f64> {
        self.values.iter().filter_map(|v| *v).collect()
    }
}

/// Natively implemented full-reference metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    MsSsim,
    Gmsd,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Psnr, Metric::Ssim, Metric::MsSsim, Metric::Gmsd];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::MsSsim => "msssim",
            Metric::Gmsd => "gmsd",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Gmsd)
    }

    /// Frame score. MS-SSIM uses as many scales as the frame size allows.
    pub fn score(self, reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
        match self {
            Metric::Psnr => psnr_frame(reference, distorted),
            Metric::Ssim => ssim_frame(reference, distorted),
            Metric::MsSsim => {
                let cfg = MsSsimConfig::fitting(reference.width(), reference.height())?;
                msssim_frame_with(reference, distorted, &cfg)
            }
            Metric::Gmsd => gmsd_frame(reference, distorted),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            "msssim" | "ms-ssim" | "ms_ssim" => Ok(Metric::MsSsim),
            "gmsd" => Ok(Metric::Gmsd),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

/// Scores every played displayed frame against the source frame it shows.
pub fn score_sequence(
    reference: &FrameSequence,
    distorted: &FrameSequence,
    align: &FrameAlignment,
    metric: Metric,
) -> Result<QualityTimeSeries> {
    if distorted.len() != align.len() {
        return Err(Error::AlignmentMismatch(format!(
            "distorted sequence has {} frames, alignment has {}",
            distorted.len(),
            align.len()
        )));
    }
    if reference.len() != align.played_count() {
        return Err(Error::AlignmentMismatch(format!(
            "reference has {} frames, alignment plays {}",
            reference.len(),
            align.played_count()
        )));
    }
    let values = align
        .entries()
        .par_iter()
        .map(|e| {
            if e.stalled {
                Ok(None)
            } else {
                metric
                    .score(&reference.frames()[e.source_index], &distorted.frames()[e.displayed_index])
                    .map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    QualityTimeSeries::new(metric.name(), metric.higher_is_better(), values, align.stalled_mask())
}
