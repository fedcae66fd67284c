//! Reference QoE models the learned predictor is compared against: two
//! stall-statistics models (FTW, VsQM) and a hybrid quality/stall index (SQI).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::srocc;
use crate::metrics::QualityTimeSeries;
use crate::video_io::{build_alignment, displayed_duration, FrameAlignment, PlayoutPattern, SpanKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtwParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for FtwParams {
    fn default() -> Self {
        FtwParams {
            a: 3.5,
            b: 0.15,
            c: 0.19,
            d: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsqmParams {
    pub segments: usize,
    /// One weight per segment, earliest first.
    pub weights: Vec<f64>,
    pub scale: f64,
}

impl Default for VsqmParams {
    fn default() -> Self {
        VsqmParams {
            segments: 3,
            weights: vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0],
            scale: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqiParams {
    /// Stall-channel slope per second, relative to the quality before the stall.
    pub penalty_rate: f64,
    pub recovery_tau: f64,
}

impl Default for SqiParams {
    fn default() -> Self {
        SqiParams {
            penalty_rate: 0.1,
            recovery_tau: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub ftw: FtwParams,
    pub vsqm: VsqmParams,
    pub sqi: SqiParams,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        let v = &self.vsqm;
        if v.segments == 0 || v.weights.len() != v.segments {
            return Err(Error::InvalidParameter(format!(
                "VsQM needs one weight per segment ({} weights, {} segments)",
                v.weights.len(),
                v.segments
            )));
        }
        if v.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("VsQM weights must be non-negative".into()));
        }
        if !(self.sqi.recovery_tau > 0.0) || !(self.sqi.penalty_rate >= 0.0) {
            return Err(Error::InvalidParameter("SQI needs recovery_tau > 0 and penalty_rate >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Ftw,
    Vsqm,
    Sqi,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Ftw, BaselineKind::Vsqm, BaselineKind::Sqi];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Ftw => "ftw",
            BaselineKind::Vsqm => "vsqm",
            BaselineKind::Sqi => "sqi",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftw" => Ok(BaselineKind::Ftw),
            "vsqm" => Ok(BaselineKind::Vsqm),
            "sqi" => Ok(BaselineKind::Sqi),
            other => Err(Error::InvalidParameter(format!("unknown baseline {other:?}"))),
        }
    }
}

/// `a·exp(−(b·L̄ + c)·N) + d`
pub fn ftw(mean_stall_s: f64, n_stalls: usize, p: &FtwParams) -> f64 {
    p.a * (-(p.b * mean_stall_s + p.c) * n_stalls as f64).exp() + p.d
}

pub fn ftw_pattern(pattern: &PlayoutPattern, p: &FtwParams) -> f64 {
    let n = pattern.stall_count();
    let mean = if n == 0 { 0.0 } else { pattern.total_stall_s() / n as f64 };
    ftw(mean, n, p)
}

/// Stall time per equal slice of the displayed timeline, weighted towards the end.
pub fn vsqm(pattern: &PlayoutPattern, p: &VsqmParams) -> Result<f64> {
    if p.segments == 0 || p.weights.len() != p.segments {
        return Err(Error::InvalidParameter("VsQM needs one weight per segment".into()));
    }
    let total = displayed_duration(pattern);
    let part = total / p.segments as f64;
    let mut stalled = vec![0.0; p.segments];
    for span in pattern.timeline() {
        if let SpanKind::Stall { .. } = span.kind {
            for (j, s) in stalled.iter_mut().enumerate() {
                let (lo, hi) = (j as f64 * part, (j + 1) as f64 * part);
                *s += (span.end_s().min(hi) - span.start_s.max(lo)).max(0.0);
            }
        }
    }
    let degradation: f64 = p.weights.iter().zip(&stalled).map(|(w, s)| w * s / part).sum();
    Ok(p.scale * (-degradation).exp())
}

/// Mean over displayed time of a presentation channel (per-frame quality,
/// held through stalls) plus a stall channel that drops linearly during a
/// stall and relaxes exponentially afterwards. Lower-is-better metrics are
/// negated so the index is always higher-is-better.
pub fn sqi(ts: &QualityTimeSeries, align: &FrameAlignment, fps: f64, p: &SqiParams) -> Result<f64> {
    if ts.len() != align.len() || ts.stalled() != align.stalled_mask().as_slice() {
        return Err(Error::AlignmentMismatch(format!(
            "series has {} frames, alignment {}",
            ts.len(),
            align.len()
        )));
    }
    if !(fps > 0.0) || !(p.recovery_tau > 0.0) {
        return Err(Error::InvalidParameter("SQI needs fps > 0 and recovery_tau > 0".into()));
    }
    let sign = if ts.higher_is_better { 1.0 } else { -1.0 };
    let values = ts.values();
    let first_played = values.iter().flatten().next().copied().ok_or(Error::EmptySeries)?;
    let h = 1.0 / fps;
    let decay = (-h / p.recovery_tau).exp();
    let (mut held, mut s, mut area) = (sign * first_played, 0.0, 0.0);
    let mut slope = 0.0;
    let mut in_stall = false;
    for v in values {
        match v {
            Some(q) => {
                held = sign * q;
                in_stall = false;
                area += h * held + s * p.recovery_tau * (1.0 - decay);
                s *= decay;
            }
            None => {
                if !in_stall {
                    slope = p.penalty_rate * held;
                    in_stall = true;
                }
                area += h * held + h * s - 0.5 * slope * h * h;
                s -= slope * h;
            }
        }
    }
    Ok(area / (values.len() as f64 * h))
}

/// A training session as the baselines see it.
#[derive(Clone, Debug)]
pub struct BaselineSession {
    pub pattern: PlayoutPattern,
    /// Needed by SQI only.
    pub series: Option<QualityTimeSeries>,
    pub mos: f64,
}

pub fn score_baseline(kind: BaselineKind, s: &BaselineSession, p: &BaselineParams) -> Result<f64> {
    match kind {
        BaselineKind::Ftw => Ok(ftw_pattern(&s.pattern, &p.ftw)),
        BaselineKind::Vsqm => vsqm(&s.pattern, &p.vsqm),
        BaselineKind::Sqi => {
            let ts = s
                .series
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("SQI needs a per-frame quality series".into()))?;
            sqi(ts, &build_alignment(&s.pattern)?, s.pattern.fps, &p.sqi)
        }
    }
}

/// Default tuning grid: the published defaults first, then variations of the
/// parameters that change the ranking.
pub fn default_baseline_grid(kind: BaselineKind) -> Vec<BaselineParams> {
    let base = BaselineParams::default();
    let mut grid = vec![base.clone()];
    match kind {
        BaselineKind::Ftw => {
            for b in [0.05, 0.15, 0.3, 0.6] {
                for c in [0.0, 0.19, 0.5, 1.0] {
                    grid.push(BaselineParams {
                        ftw: FtwParams { b, c, ..base.ftw },
                        ..base.clone()
                    });
                }
            }
        }
        BaselineKind::Vsqm => {
            for w in [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [1.0, 3.0, 9.0], [3.0, 2.0, 1.0]] {
                for k in [0.5, 1.0, 2.0] {
                    let total: f64 = w.iter().sum();
                    grid.push(BaselineParams {
                        vsqm: VsqmParams {
                            weights: w.iter().map(|x| k * x / total).collect(),
                            ..base.vsqm.clone()
                        },
                        ..base.clone()
                    });
                }
            }
        }
        BaselineKind::Sqi => {
            for penalty_rate in [0.02, 0.05, 0.1, 0.2, 0.5] {
                for recovery_tau in [1.0, 2.0, 5.0, 10.0] {
                    grid.push(BaselineParams {
                        sqi: SqiParams {
                            penalty_rate,
                            recovery_tau,
                        },
                        ..base.clone()
                    });
                }
            }
        }
    }
    grid
}

/// Exhaustive search for the grid point with the highest SROCC against the
/// training MOS; ties keep the earlier candidate.
pub fn tune_baseline(train: &[BaselineSession], kind: BaselineKind, grid: &[BaselineParams]) -> Result<BaselineParams> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if train.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    let mos: Vec<f64> = train.iter().map(|s| s.mos).collect();
    let mut best: Option<(usize, f64)> = None;
    for (g, p) in grid.iter().enumerate() {
        p.validate()?;
        let scores = train.iter().map(|s| score_baseline(kind, s, p)).collect::<Result<Vec<f64>>>()?;
        let r = srocc(&scores, &mos).unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((g, r));
        }
    }
    Ok(grid[best.map_or(0, |b| b.0)].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video_io::PlayoutEvent;
    use approx::assert_abs_diff_eq;

    fn stalled(n: usize, fps: f64, at: usize, dur: f64) -> PlayoutPattern {
        let mut events = Vec::new();
        if at > 0 {
            events.push(PlayoutEvent::Play {
                first_src_frame: 0,
                last_src_frame: at - 1,
                bitrate_kbps: 1000.0,
            });
        }
        events.push(PlayoutEvent::Stall {
            at_src_frame: at,
            duration_s: dur,
        });
        events.push(PlayoutEvent::Play {
            first_src_frame: at,
            last_src_frame: n - 1,
            bitrate_kbps: 1000.0,
        });
        PlayoutPattern::new("p", fps, n, 1000.0, events).unwrap()
    }

    fn series_for(p: &PlayoutPattern, q: impl Fn(usize) -> f64) -> QualityTimeSeries {
        let a = build_alignment(p).unwrap();
        let values = a.entries().iter().map(|e| (!e.stalled).then(|| q(e.source_index))).collect();
        QualityTimeSeries::new("q", true, values, a.stalled_mask()).unwrap()
    }

    #[test]
    fn ftw_examples() {
        let p = FtwParams::default();
        assert_abs_diff_eq!(ftw(3.0, 0, &p), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ftw(4.0, 1, &p), 3.5 * (-0.79f64).exp() + 1.5, epsilon = 1e-12);
        assert!(ftw(2.0, 2, &p) < ftw(2.0, 1, &p));
    }

    #[test]
    fn vsqm_examples() {
        let clean = PlayoutPattern::clean("c", 1.0, 30, 1000.0).unwrap();
        let w = VsqmParams {
            segments: 3,
            weights: vec![1.0, 2.0, 3.0],
            scale: 5.0,
        };
        assert_eq!(vsqm(&clean, &w).unwrap(), 5.0);
        // 27 s of content plus a 3 s stall starting at 12 s: entirely inside [10, 20)
        let mid = stalled(27, 1.0, 12, 3.0);
        assert_abs_diff_eq!(vsqm(&mid, &w).unwrap(), 5.0 * (-0.6f64).exp(), epsilon = 1e-12);
        let early = stalled(27, 1.0, 2, 3.0);
        let late = stalled(27, 1.0, 24, 3.0);
        assert!(vsqm(&late, &w).unwrap() < vsqm(&early, &w).unwrap());
    }

    #[test]
    fn sqi_without_stalls_is_mean_quality() {
        let p = PlayoutPattern::clean("c", 5.0, 20, 1000.0).unwrap();
        let ts = series_for(&p, |i| i as f64 / 10.0);
        let got = sqi(&ts, &build_alignment(&p).unwrap(), 5.0, &SqiParams::default()).unwrap();
        assert_abs_diff_eq!(got, 0.95, epsilon = 1e-12);
    }

    #[test]
    fn sqi_hand_integral() {
        let p = stalled(10, 1.0, 5, 2.0);
        let ts = series_for(&p, |_| 0.9);
        let params = SqiParams {
            penalty_rate: 0.1,
            recovery_tau: 5.0,
        };
        let got = sqi(&ts, &build_alignment(&p).unwrap(), 1.0, &params).unwrap();
        // presentation 0.9 * 12 s; stall drop to -0.18 (area -0.18); recovery over 5 s
        let want = (10.8 - 0.18 - 0.18 * 5.0 * (1.0 - (-1.0f64).exp())) / 12.0;
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }

    #[test]
    fn stall_only_models_ignore_quality() {
        let p = stalled(30, 5.0, 10, 1.5);
        let a = BaselineSession {
            pattern: p.clone(),
            series: Some(series_for(&p, |_| 0.2)),
            mos: 1.0,
        };
        let b = BaselineSession {
            series: Some(series_for(&p, |i| i as f64)),
            ..a.clone()
        };
        let params = BaselineParams::default();
        for k in [BaselineKind::Ftw, BaselineKind::Vsqm] {
            assert_eq!(score_baseline(k, &a, &params).unwrap(), score_baseline(k, &b, &params).unwrap());
        }
        assert_ne!(
            score_baseline(BaselineKind::Sqi, &a, &params).unwrap(),
            score_baseline(BaselineKind::Sqi, &b, &params).unwrap()
        );
    }

    #[test]
    fn tuning_edge_cases() {
        let p = stalled(30, 5.0, 10, 1.5);
        let s = vec![BaselineSession {
            pattern: p,
            series: None,
            mos: 1.0,
        }];
        assert!(tune_baseline(&s, BaselineKind::Ftw, &[]).is_err());
        let only = BaselineParams::default();
        assert_eq!(tune_baseline(&s, BaselineKind::Ftw, std::slice::from_ref(&only)).unwrap(), only);
        assert!(tune_baseline(&s, BaselineKind::Sqi, &[only]).is_err());
    }
}
