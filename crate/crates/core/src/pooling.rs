//! Temporal pooling of per-frame quality into one score.
//!
//! All methods operate on the played frames only, with stall gaps closed.
//! For distortion-polarity metrics the series is negated before pooling and
//! the result negated back, so the perceptually worse side always receives
//! the memory/low-cluster emphasis.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::QualityTimeSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingMethod {
    Mean,
    Hysteresis,
    Vq,
}

impl PoolingMethod {
    pub fn name(self) -> &'static str {
        match self {
            PoolingMethod::Mean => "mean",
            PoolingMethod::Hysteresis => "hysteresis",
            PoolingMethod::Vq => "vq",
        }
    }
}

impl FromStr for PoolingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolingMethod::Mean),
            "hysteresis" => Ok(PoolingMethod::Hysteresis),
            "vq" => Ok(PoolingMethod::Vq),
            other => Err(Error::InvalidParameter(format!("unknown pooling method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisParams {
    pub tau_s: f64,
    pub alpha: f64,
}

impl Default for HysteresisParams {
    fn default() -> Self {
        HysteresisParams {
            tau_s: 2.0,
            alpha: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqParams {
    pub w_low: f64,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for VqParams {
    fn default() -> Self {
        VqParams {
            w_low: 0.75,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolingConfig {
    pub method: PoolingMethod,
    #[serde(default)]
    pub hysteresis: HysteresisParams,
    #[serde(default)]
    pub vq: VqParams,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig::new(PoolingMethod::Mean)
    }
}

impl PoolingConfig {
    pub fn new(method: PoolingMethod) -> Self {
        PoolingConfig {
            method,
            hysteresis: HysteresisParams::default(),
            vq: VqParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hysteresis;
        if !(h.tau_s.is_finite() && h.tau_s > 0.0) {
            return Err(Error::InvalidParameter(format!("pooling tau_s must be positive, got {}", h.tau_s)));
        }
        if !(0.0..=1.0).contains(&h.alpha) {
            return Err(Error::InvalidParameter(format!("pooling alpha {} outside [0,1]", h.alpha)));
        }
        if !(0.0..=1.0).contains(&self.vq.w_low) {
            return Err(Error::InvalidParameter(format!("pooling w_low {} outside [0,1]", self.vq.w_low)));
        }
        if self.vq.kmeans_restarts == 0 {
            return Err(Error::InvalidParameter("kmeans_restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pools a series with the configured method.
pub fn pool(ts: &QualityTimeSeries, cfg: &PoolingConfig, fps: f64) -> Result<f64> {
    cfg.validate()?;
    match cfg.method {
        PoolingMethod::Mean => pool_mean(ts),
        PoolingMethod::Hysteresis => pool_hysteresis(ts, cfg, fps),
        PoolingMethod::Vq => pool_vq(ts, cfg),
    }
}

fn played_nonempty(ts: &QualityTimeSeries) -> Result<Vec<f64>> {
    let v = ts.played();
    if v.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(v)
}

/// Mean over played frames.
pub fn pool_mean(ts: &QualityTimeSeries) -> Result<f64> {
    let v = played_nonempty(ts)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

fn with_polarity(ts: &QualityTimeSeries, f: impl FnOnce(&[f64]) -> f64) -> Result<f64> {
    let mut v = played_nonempty(ts)?;
    if ts.higher_is_better {
        Ok(f(&v))
    } else {
        v.iter_mut().for_each(|x| *x = -*x);
        Ok(-f(&v))
    }
}

/// Hysteresis pooling: each frame blends the worst score of the trailing
/// window with a worst-first weighted average of the leading window.
pub fn pool_hysteresis(ts: &QualityTimeSeries, cfg: &PoolingConfig, fps: f64) -> Result<f64> {
    cfg.validate()?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidParameter(format!("fps must be positive, got {fps}")));
    }
    let window = (cfg.hysteresis.tau_s * fps).round() as usize;
    let alpha = cfg.hysteresis.alpha;
    with_polarity(ts, |v| hysteresis_mean(v, window, alpha))
}

fn hysteresis_mean(v: &[f64], window: usize, alpha: f64) -> f64 {
    let n = v.len();
    let mut total = 0.0;
    let mut ahead = Vec::with_capacity(window + 1);
    for t in 0..n {
        let memory = v[t.saturating_sub(window)..=t]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        ahead.clear();
        ahead.extend_from_slice(&v[t..(t + window + 1).min(n)]);
        ahead.sort_by(f64::total_cmp);
        let k = ahead.len();
        // linearly decaying weights k, k-1, ..., 1 over the ascending scores
        let norm = (k * (k + 1) / 2) as f64;
        let current: f64 = ahead
            .iter()
            .enumerate()
            .map(|(i, &s)| (k - i) as f64 * s)
            .sum::<f64>()
            / norm;
        total += alpha * memory + (1.0 - alpha) * current;
    }
    total / n as f64
}

/// VQ pooling: seeded 1-D 2-means, then `w_low` on the worse cluster mean.
pub fn pool_vq(ts: &QualityTimeSeries, cfg: &PoolingConfig) -> Result<f64> {
    cfg.validate()?;
    let p = &cfg.vq;
    with_polarity(ts, |v| vq_mean(v, p))
}

fn vq_mean(v: &[f64], p: &VqParams) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if v.len() < 2 || lo == hi {
        return mean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut best: Option<(f64, f64, f64)> = None;
    for _ in 0..p.kmeans_restarts {
        let a = v[rng.random_range(0..v.len())];
        let others: Vec<f64> = v.iter().copied().filter(|&x| x != a).collect();
        let b = others[rng.random_range(0..others.len())];
        let (low, high, sse) = two_means(v, a.min(b), a.max(b));
        if best.is_none_or(|(_, _, s)| sse < s) {
            best = Some((low, high, sse));
        }
    }
    let (low, high, _) = best.expect("at least one restart");
    p.w_low * low + (1.0 - p.w_low) * high
}

/// Lloyd iterations from centroids `c0 < c1`; returns (low mean, high mean, SSE).
fn two_means(v: &[f64], mut c0: f64, mut c1: f64) -> (f64, f64, f64) {
    for _ in 0..100 {
        let split = 0.5 * (c0 + c1);
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &x in v {
            if x <= split {
                s0 += x;
                n0 += 1;
            } else {
                s1 += x;
                n1 += 1;
            }
        }
        let (m0, m1) = (s0 / n0 as f64, s1 / n1 as f64);
        if m0 == c0 && m1 == c1 {
            break;
        }
        c0 = m0;
        c1 = m1;
    }
    let split = 0.5 * (c0 + c1);
    let sse = v
        .iter()
        .map(|&x| if x <= split { (x - c0).powi(2) } else { (x - c1).powi(2) })
        .sum();
    (c0, c1, sse)
}
