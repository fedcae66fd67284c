//! Rank and linear correlation, the logistic mapping applied before LCC,
//! and the rank-sum test.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank-order correlation; `None` for constant input or fewer than 3 points.
pub fn srocc(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Median of the finite values.
pub fn median(v: &[f64]) -> Option<f64> {
    let mut f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if f.is_empty() {
        return None;
    }
    f.sort_by(f64::total_cmp);
    let n = f.len();
    Some(if n % 2 == 1 { f[n / 2] } else { 0.5 * (f[n / 2 - 1] + f[n / 2]) })
}

/// `b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`
pub fn logistic4(beta: &[f64; 4], x: f64) -> f64 {
    beta[1] + (beta[0] - beta[1]) / (1.0 + (-(x - beta[2]) / beta[3].abs()).exp())
}

pub const LOGISTIC_ITERATIONS: usize = 2000;
pub const LOGISTIC_RESTARTS: usize = 3;

/// Downhill simplex minimization, fixed iteration budget.
fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(f: F, start: [f64; 4], step: [f64; 4], iterations: usize) -> ([f64; 4], f64) {
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, f(&start)));
    for k in 0..4 {
        let mut p = start;
        p[k] += step[k];
        simplex.push((p, f(&p)));
    }
    let lerp = |a: &[f64; 4], b: &[f64; 4], t: f64| -> [f64; 4] { std::array::from_fn(|k| a[k] + t * (b[k] - a[k])) };
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[4].1);
        if (worst - best).abs() <= 1e-15 * (1.0 + best.abs()) {
            break;
        }
        let centroid: [f64; 4] = std::array::from_fn(|k| simplex[..4].iter().map(|s| s.0[k]).sum::<f64>() / 4.0);
        let reflected = lerp(&centroid, &simplex[4].0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &simplex[4].0, -2.0);
            let fe = f(&expanded);
            simplex[4] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[4].1 {
                lerp(&centroid, &reflected, 0.5)
            } else {
                lerp(&centroid, &simplex[4].0, 0.5)
            };
            let fc = f(&contracted);
            if fc < fr.min(simplex[4].1) {
                simplex[4] = (contracted, fc);
            } else {
                let b = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&b, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Fits the monotone logistic of `pred` onto `mos` (least squares).
/// Returns `None` when `pred` is constant.
pub fn fit_logistic(pred: &[f64], mos: &[f64]) -> Option<[f64; 4]> {
    let n = pred.len() as f64;
    let mean = pred.iter().sum::<f64>() / n;
    let sd = (pred.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    let sse = |b: &[f64; 4]| {
        let s: f64 = pred.iter().zip(mos).map(|(&p, &m)| (logistic4(b, p) - m).powi(2)).sum();
        if s.is_finite() { s } else { f64::INFINITY }
    };
    let (lo, hi) = mos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| (a.min(m), b.max(m)));
    let spec_init = [hi, lo, median(pred)?, sd / 4.0];

    // A very wide logistic is linear over the data; centred on the OLS line it
    // starts the search from the least-squares affine fit.
    let mm = mos.iter().sum::<f64>() / n;
    let slope = pred.iter().zip(mos).map(|(p, m)| (p - mean) * (m - mm)).sum::<f64>() / (sd * sd * n);
    let width = 1000.0 * sd;
    let linear_init = [mm + 2.0 * slope * width, mm - 2.0 * slope * width, mean, width];

    let mut rng = rng::stream(0x5eed_1061, &[]);
    let jitter: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.8..1.2));
    let perturbed = std::array::from_fn(|k| spec_init[k] * jitter[k]);

    let mut best: Option<([f64; 4], f64)> = None;
    for start in [spec_init, linear_init, perturbed].into_iter().take(LOGISTIC_RESTARTS) {
        let range = (hi - lo).max(1e-6);
        let step = [0.1 * range.max(start[0].abs() * 0.05), 0.1 * range.max(start[1].abs() * 0.05), 0.5 * sd, 0.5 * start[3].abs().max(sd * 0.1)];
        let r = nelder_mead(&sse, start, step, LOGISTIC_ITERATIONS);
        if best.is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
    }
    best.map(|b| b.0)
}

/// Pearson correlation after the logistic mapping; `None` if undefined.
pub fn lcc_after_logistic(pred: &[f64], mos: &[f64]) -> Option<f64> {
    if pred.len() != mos.len() || pred.len() < 5 {
        return None;
    }
    let beta = fit_logistic(pred, mos)?;
    let mapped: Vec<f64> = pred.iter().map(|&p| logistic4(&beta, p)).collect();
    pearson(&mapped, mos)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Mann–Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Wilcoxon rank-sum test, normal approximation with tie correction.
pub fn ranksum(a: &[f64], b: &[f64]) -> RankSum {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&all);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if !(var > 0.0) {
        return RankSum { u, z: 0.0, p_value: 1.0 };
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    let normal = Normal::standard();
    RankSum {
        u,
        z,
        p_value: (2.0 * normal.sf(z.abs())).min(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "1")]
    Better,
    #[serde(rename = "0")]
    Worse,
    #[serde(rename = "-")]
    Indistinct,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Better => "1",
            Verdict::Worse => "0",
            Verdict::Indistinct => "-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub methods: Vec<String>,
    pub alpha: f64,
    /// `entries[i][j]`: whether method `i` is better than method `j`.
    pub entries: Vec<Vec<Verdict>>,
}

impl SignificanceMatrix {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("method");
        for m in &self.methods {
            s.push(',');
            s.push_str(m);
        }
        s.push('\n');
        for (m, row) in self.methods.iter().zip(&self.entries) {
            s.push_str(m);
            for v in row {
                s.push(',');
                s.push_str(v.symbol());
            }
            s.push('\n');
        }
        s
    }
}

pub const MIN_RANKSUM_TRIALS: usize = 10;

/// Pairwise rank-sum verdicts between per-trial SROCC distributions.
pub fn ranksum_significance(methods: &[(String, Vec<f64>)], alpha: f64) -> Result<SignificanceMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if let Some((name, v)) = methods.iter().find(|(_, v)| v.len() < MIN_RANKSUM_TRIALS) {
        return Err(Error::InvalidParameter(format!(
            "{name} has {} trials; the rank-sum test needs at least {MIN_RANKSUM_TRIALS}",
            v.len()
        )));
    }
    if let Some(first) = methods.first() {
        if let Some((name, v)) = methods.iter().find(|(_, v)| v.len() != first.1.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{name} has {} trials, {} has {}",
                v.len(),
                first.0,
                first.1.len()
            )));
        }
    }
    let k = methods.len();
    let mut entries = vec![vec![Verdict::Indistinct; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let r = ranksum(&methods[i].1, &methods[j].1);
            if r.p_value < alpha {
                entries[i][j] = if r.z > 0.0 { Verdict::Better } else { Verdict::Worse };
            }
        }
    }
    Ok(SignificanceMatrix {
        methods: methods.iter().map(|m| m.0.clone()).collect(),
        alpha,
        entries,
    })
}
