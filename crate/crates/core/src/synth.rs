//! Synthetic sessions: procedurally generated reference videos, distorted
//! renditions whose damage follows the segment bitrate, random playout
//! patterns, and MOS drawn from a declared oracle over the features.
//!
//! The oracle coefficients are fixture constants chosen for testability;
//! they make no claim about how real viewers weigh the features.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, QoEDataset, QoESample, SessionEntry};
use crate::error::{Error, Result};
use crate::features::{extract_features_with, FeatureVector, MemoryVariant};
use crate::io::write_atomic;
use crate::metrics::{score_sequence, Metric};
use crate::pooling::{pool_mean, PoolingConfig};
use crate::rng;
use crate::video_io::{build_alignment, write_yuv, FrameSequence, LumaPlane, PlayoutEvent, PlayoutPattern};

/// Weights of the MOS oracle
/// `intercept + quality·q − r1·R1 − r2·R2 + m·M − i·I − interaction·R1·(1−M)`
/// where `q` is the dataset-normalized pooled quality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleCoefficients {
    pub intercept: f64,
    pub quality: f64,
    pub r1: f64,
    pub r2: f64,
    pub m: f64,
    pub i: f64,
    pub interaction: f64,
}

impl Default for OracleCoefficients {
    fn default() -> Self {
        OracleCoefficients {
            intercept: 0.0,
            quality: 40.0,
            r1: 18.0,
            r2: 4.0,
            m: 12.0,
            i: 8.0,
            interaction: 10.0,
        }
    }
}

impl OracleCoefficients {
    /// `f.vqa` must already be normalized to [0, 1].
    pub fn score(&self, f: &FeatureVector) -> f64 {
        self.intercept + self.quality * f.vqa - self.r1 * f.r1 - self.r2 * f.r2 + self.m * f.m
            - self.i * f.i
            - self.interaction * f.r1 * (1.0 - f.m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_contents: usize,
    pub n_patterns: usize,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    /// Source length range; one length is drawn per dataset.
    pub frames_min: usize,
    pub frames_max: usize,
    pub stalls_min: usize,
    pub stalls_max: usize,
    pub stall_s_min: f64,
    pub stall_s_max: f64,
    /// Maximum number of bitrate segments per pattern.
    pub max_segments: usize,
    pub ladder_kbps: Vec<f64>,
    /// When false every session plays at the top rung.
    pub bitrate_switching: bool,
    pub mos_noise_sigma: f64,
    pub mos_bounds: [f64; 2],
    pub oracle: OracleCoefficients,
    /// Quality measure the oracle sees (mean-pooled).
    pub oracle_metric: Metric,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_contents: 10,
            n_patterns: 6,
            width: 64,
            height: 64,
            fps: 5.0,
            frames_min: 60,
            frames_max: 120,
            stalls_min: 0,
            stalls_max: 3,
            stall_s_min: 0.5,
            stall_s_max: 4.0,
            max_segments: 3,
            ladder_kbps: vec![250.0, 500.0, 1000.0, 2000.0],
            bitrate_switching: true,
            mos_noise_sigma: 3.0,
            mos_bounds: [0.0, 100.0],
            oracle: OracleCoefficients::default(),
            oracle_metric: Metric::Psnr,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synth config: {m}")));
        if self.n_contents == 0 || self.n_patterns == 0 {
            return bad("need at least one content and one pattern");
        }
        if self.width < 16 || self.height < 16 || self.width % 2 == 1 || self.height % 2 == 1 {
            return bad("frame sides must be even and at least 16");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if self.frames_min < 2 || self.frames_min > self.frames_max {
            return bad("frame range must be non-empty and start at 2 or more");
        }
        if self.stalls_min > self.stalls_max || !(self.stall_s_min > 0.0 && self.stall_s_min <= self.stall_s_max) {
            return bad("stall ranges must be non-empty with positive durations");
        }
        if self.stalls_max >= self.frames_min {
            return bad("more stalls than frames");
        }
        if self.max_segments == 0 {
            return bad("max_segments must be at least 1");
        }
        if self.ladder_kbps.is_empty() || self.ladder_kbps.iter().any(|r| !(*r > 0.0)) {
            return bad("ladder must hold positive rates");
        }
        if !(self.mos_noise_sigma >= 0.0) || !(self.mos_bounds[0] < self.mos_bounds[1]) {
            return bad("sigma must be >= 0 and MOS bounds increasing");
        }
        Ok(())
    }

    fn top_rate(&self) -> f64 {
        self.ladder_kbps.iter().copied().fold(f64::MIN, f64::max)
    }

    fn bottom_rate(&self) -> f64 {
        self.ladder_kbps.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Distortion strength in (0, 1]; strictly decreasing in bitrate.
    pub fn strength(&self, bitrate_kbps: f64) -> f64 {
        let (lo, hi) = (self.bottom_rate(), self.top_rate());
        if hi <= lo {
            return 0.15;
        }
        0.15 + 0.85 * (hi / bitrate_kbps).ln() / (hi / lo).ln()
    }

    /// Source length shared by all sessions of the dataset.
    pub fn source_frames(&self) -> usize {
        rng::stream(self.seed, &[0]).random_range(self.frames_min..=self.frames_max)
    }
}

/// A random valid pattern over `n_frames` source frames.
pub fn gen_pattern(cfg: &SynthConfig, pattern_id: &str, n_frames: usize, rng: &mut ChaCha8Rng) -> Result<PlayoutPattern> {
    let top = cfg.top_rate();
    let n_stalls = rng.random_range(cfg.stalls_min..=cfg.stalls_max);
    let n_segments = if cfg.bitrate_switching {
        rng.random_range(1..=cfg.max_segments.min(n_frames))
    } else {
        1
    };
    let stall_at = rand::seq::index::sample(rng, n_frames, n_stalls).into_vec();
    let mut segment_starts: Vec<usize> = rand::seq::index::sample(rng, n_frames - 1, n_segments - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    segment_starts.push(0);
    let mut cuts: Vec<usize> = segment_starts.iter().chain(&stall_at).copied().collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut events = Vec::new();
    let mut rate = top;
    for (k, &start) in cuts.iter().enumerate() {
        let end = cuts.get(k + 1).copied().unwrap_or(n_frames);
        if stall_at.contains(&start) {
            let d = rng.random_range(cfg.stall_s_min..=cfg.stall_s_max);
            events.push(PlayoutEvent::Stall {
                at_src_frame: start,
                duration_s: ((d * 10.0).round() / 10.0).max(cfg.stall_s_min),
            });
        }
        // a cut that only exists for a stall keeps the running bitrate
        if cfg.bitrate_switching && segment_starts.contains(&start) {
            rate = cfg.ladder_kbps[rng.random_range(0..cfg.ladder_kbps.len())];
        }
        events.push(PlayoutEvent::Play {
            first_src_frame: start,
            last_src_frame: end - 1,
            bitrate_kbps: rate,
        });
    }
    PlayoutPattern::new(pattern_id, cfg.fps, n_frames, top, events)
}

fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let mut s = 0.0;
            for yy in y0..=y1 {
                s += src[yy * w + x0..=yy * w + x1].iter().sum::<f64>();
            }
            out[y * w + x] = s / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

/// Moving oriented gradient over a static per-content texture, plus light
/// temporal noise.
pub fn gen_reference(cfg: &SynthConfig, n_frames: usize, rng: &mut ChaCha8Rng) -> Result<FrameSequence> {
    let (w, h) = (cfg.width, cfg.height);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let freq: f64 = rng.random_range(1.0..4.0);
    let speed: f64 = rng.random_range(0.05..0.4);
    let amp: f64 = rng.random_range(30.0..80.0);
    let texture_amp: f64 = rng.random_range(4.0..30.0);
    let texture: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let texture = box_blur(&texture, w, h, rng.random_range(0..3));
    let (ca, sa) = (angle.cos(), angle.sin());
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let phase = speed * t as f64;
        let plane = LumaPlane::from_fn(w, h, |x, y| {
            let u = (x as f64 * ca + y as f64 * sa) / w as f64;
            let v = 128.0
                + amp * (std::f64::consts::TAU * freq * u + phase).sin()
                + texture_amp * texture[y * w + x] * 3.0
                + rng.random_range(-2.0..2.0);
            v.round().clamp(0.0, 255.0) as u8
        });
        frames.push(plane);
    }
    FrameSequence::new(w, h, cfg.fps, frames)
}

/// Renders the displayed sequence: each source frame is damaged by
/// `strength(bitrate) · (blur(ref) − ref + noise)` with a noise field fixed
/// per (content, frame), so lower bitrates are never better frame by frame;
/// frozen frames repeat the frame shown before the stall.
pub fn render_distorted(cfg: &SynthConfig, reference: &FrameSequence, pattern: &PlayoutPattern, noise_seed: u64) -> Result<FrameSequence> {
    let align = build_alignment(pattern)?;
    if reference.len() != pattern.source_frame_count {
        return Err(Error::AlignmentMismatch(format!(
            "reference has {} frames, pattern covers {}",
            reference.len(),
            pattern.source_frame_count
        )));
    }
    let (w, h) = (reference.width(), reference.height());
    let rates = pattern.frame_bitrates();
    let damaged: Vec<LumaPlane> = reference
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let src = f.to_f64();
            let blurred = box_blur(&src, w, h, 2);
            let mut rng = rng::stream(noise_seed, &[i as u64]);
            let noise = Normal::new(0.0, 6.0).expect("valid sigma");
            let s = cfg.strength(rates[i]);
            let data = src
                .iter()
                .zip(&blurred)
                .map(|(&a, &b)| {
                    let d = b - a + noise.sample(&mut rng);
                    (a + (s * d).round()).clamp(0.0, 255.0) as u8
                })
                .collect();
            LumaPlane::new(w, h, data)
        })
        .collect::<Result<_>>()?;
    let frames = align.entries().iter().map(|e| damaged[e.source_index].clone()).collect();
    FrameSequence::new(w, h, cfg.fps, frames)
}

/// Reference and distorted sequence for one session.
pub fn gen_video_pair(cfg: &SynthConfig, pattern: &PlayoutPattern, rng: &mut ChaCha8Rng) -> Result<(FrameSequence, FrameSequence)> {
    let reference = gen_reference(cfg, pattern.source_frame_count, rng)?;
    let noise_seed = rng.random();
    let dist = render_distorted(cfg, &reference, pattern, noise_seed)?;
    Ok((reference, dist))
}

/// Min–max normalization to [0, 1], flipped for lower-is-better scores.
pub fn normalize_quality(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    values
        .iter()
        .map(|&v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            if higher_is_better { t } else { 1.0 - t }
        })
        .collect()
}

/// Oracle MOS for features whose `vqa` is already normalized.
pub fn synth_mos(f: &FeatureVector, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> f64 {
    let g = cfg.oracle.score(f);
    let noise = if cfg.mos_noise_sigma > 0.0 {
        Normal::new(0.0, cfg.mos_noise_sigma).expect("valid sigma").sample(rng)
    } else {
        0.0
    };
    (g + noise).clamp(cfg.mos_bounds[0], cfg.mos_bounds[1])
}

#[derive(Clone, Debug)]
pub struct SynthSession {
    pub content: usize,
    pub pattern: usize,
    pub distorted: FrameSequence,
    pub mos: f64,
}

/// A generated dataset held in memory.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub config: SynthConfig,
    pub references: Vec<FrameSequence>,
    pub patterns: Vec<PlayoutPattern>,
    pub sessions: Vec<SynthSession>,
}

pub fn content_id(c: usize) -> String {
    format!("c{c:02}")
}

pub fn pattern_id(p: usize) -> String {
    format!("p{p:02}")
}

impl SynthData {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.source_frames();
        let patterns = (0..cfg.n_patterns)
            .map(|p| gen_pattern(cfg, &pattern_id(p), n, &mut rng::stream(cfg.seed, &[2, p as u64])))
            .collect::<Result<Vec<_>>>()?;
        let references = (0..cfg.n_contents)
            .into_par_iter()
            .map(|c| gen_reference(cfg, n, &mut rng::stream(cfg.seed, &[1, c as u64])))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(usize, usize)> = (0..cfg.n_contents)
            .flat_map(|c| (0..cfg.n_patterns).map(move |p| (c, p)))
            .collect();
        let rendered = pairs
            .par_iter()
            .map(|&(c, p)| {
                let dist = render_distorted(cfg, &references[c], &patterns[p], rng::derive(cfg.seed, &[3, c as u64]))?;
                let align = build_alignment(&patterns[p])?;
                let ts = score_sequence(&references[c], &dist, &align, cfg.oracle_metric)?;
                let q = pool_mean(&ts)?;
                let (r1, r2, m, i) = crate::features::stall_features(&patterns[p], MemoryVariant::Rate)?;
                Ok((dist, FeatureVector { vqa: q, r1, r2, m, i }))
            })
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<f64> = rendered.iter().map(|r| r.1.vqa).collect();
        let norm = normalize_quality(&raw, cfg.oracle_metric.higher_is_better());
        let sessions = pairs
            .iter()
            .zip(rendered)
            .zip(norm)
            .map(|((&(c, p), (distorted, f)), q)| {
                let mut mos_rng = rng::stream(cfg.seed, &[4, c as u64, p as u64]);
                let mos = synth_mos(&FeatureVector { vqa: q, ..f }, cfg, &mut mos_rng);
                SynthSession {
                    content: c,
                    pattern: p,
                    distorted,
                    mos,
                }
            })
            .collect();
        Ok(SynthData {
            config: cfg.clone(),
            references,
            patterns,
            sessions,
        })
    }

    /// Extracts the feature table with the given quality metric and pooling.
    pub fn features(&self, metric: Metric, pooling: &PoolingConfig, memory: MemoryVariant) -> Result<QoEDataset> {
        let samples = self
            .sessions
            .par_iter()
            .map(|s| {
                let pattern = &self.patterns[s.pattern];
                let align = build_alignment(pattern)?;
                let ts = score_sequence(&self.references[s.content], &s.distorted, &align, metric)?;
                Ok(QoESample {
                    content_id: content_id(s.content),
                    pattern_id: pattern.pattern_id.clone(),
                    features: extract_features_with(&ts, pattern, pooling, memory)?,
                    mos: s.mos,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ds = QoEDataset::new(samples, metric.higher_is_better());
        ds.memory = memory;
        Ok(ds)
    }

    /// Writes raw videos, pattern files and `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (c, r) in self.references.iter().enumerate() {
            write_yuv(dir.join(format!("ref_{}.yuv", content_id(c))), r)?;
        }
        for p in &self.patterns {
            write_atomic(&dir.join(format!("pattern_{}.json", p.pattern_id)), p.to_json_string().as_bytes())?;
        }
        let mut sessions = Vec::with_capacity(self.sessions.len());
        for s in &self.sessions {
            let (cid, pid) = (content_id(s.content), &self.patterns[s.pattern].pattern_id);
            let dist = format!("dist_{cid}_{pid}.yuv");
            write_yuv(dir.join(&dist), &s.distorted)?;
            sessions.push(SessionEntry {
                content_id: cid.clone(),
                pattern_id: pid.clone(),
                pattern_file: PathBuf::from(format!("pattern_{pid}.json")),
                mos: s.mos,
                dist_video: Some(PathBuf::from(dist)),
                scores_csv: None,
                ref_video: Some(PathBuf::from(format!("ref_{cid}.yuv"))),
            });
        }
        let manifest = Manifest {
            width: Some(self.config.width),
            height: Some(self.config.height),
            mos_bounds: Some(self.config.mos_bounds),
            sessions,
            base_dir: dir.to_path_buf(),
        };
        let path = dir.join("manifest.json");
        write_atomic(&path, manifest.to_json_string().as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;
    use rand::SeedableRng;

    fn small() -> SynthConfig {
        SynthConfig {
            n_contents: 3,
            n_patterns: 2,
            frames_min: 20,
            frames_max: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn oracle_example() {
        let cfg = SynthConfig {
            mos_noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let f = FeatureVector { vqa: 1.0, r1: 0.0, r2: 0.0, m: 1.0, i: 0.0 };
        assert_eq!(synth_mos(&f, &cfg, &mut ChaCha8Rng::seed_from_u64(0)), 52.0);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let g = synth_mos(&FeatureVector { r1: k as f64 / 10.0, m: 0.4, ..f }, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
            assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = SynthConfig::default();
        let f = FeatureVector { vqa: 0.5, r1: 0.1, r2: 1.0, m: 0.3, i: 0.2 };
        let a = synth_mos(&f, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, synth_mos(&f, &cfg, &mut ChaCha8Rng::seed_from_u64(5)));
        assert_ne!(a, synth_mos(&f, &cfg, &mut ChaCha8Rng::seed_from_u64(6)));
    }

    #[test]
    fn patterns_are_valid_and_seeded() {
        let cfg = SynthConfig::default();
        for s in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let n = rng.random_range(cfg.frames_min..=cfg.frames_max);
            let p = gen_pattern(&cfg, "p", n, &mut rng).unwrap();
            p.validate().unwrap();
            assert!(p.stall_count() <= cfg.stalls_max);
        }
        let a = gen_pattern(&cfg, "p", 80, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, gen_pattern(&cfg, "p", 80, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
        let none = SynthConfig {
            stalls_min: 0,
            stalls_max: 0,
            ..cfg
        };
        for s in 0..50 {
            assert_eq!(gen_pattern(&none, "p", 80, &mut ChaCha8Rng::seed_from_u64(s)).unwrap().stall_count(), 0);
        }
    }

    #[test]
    fn top_rate_is_never_worse() {
        let cfg = small();
        let reference = gen_reference(&cfg, 12, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let psnr_at = |rate: f64| {
            let p = PlayoutPattern::clean("x", cfg.fps, 12, rate).unwrap();
            let p = PlayoutPattern::new("x", cfg.fps, 12, 2000.0, p.events.clone()).unwrap();
            let d = render_distorted(&cfg, &reference, &p, 7).unwrap();
            score_sequence(&reference, &d, &build_alignment(&p).unwrap(), Metric::Psnr).unwrap().played()
        };
        let top = psnr_at(2000.0);
        for rate in [250.0, 500.0, 1000.0] {
            let low = psnr_at(rate);
            assert!(top.iter().zip(&low).all(|(a, b)| a >= b));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let a = SynthData::generate(&small()).unwrap();
        let b = SynthData::generate(&small()).unwrap();
        assert_eq!(a.references, b.references);
        assert_eq!(a.sessions.len(), 6);
        for (x, y) in a.sessions.iter().zip(&b.sessions) {
            assert_eq!(x.distorted, y.distorted);
            assert_eq!(x.mos, y.mos);
            let align = build_alignment(&a.patterns[x.pattern]).unwrap();
            assert_eq!(x.distorted.len(), align.len());
        }
    }
}
