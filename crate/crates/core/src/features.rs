//! Session features: pooled quality, rebuffering, memory and impairment
//! duration, plus feature standardization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::QualityTimeSeries;
use crate::pooling::{pool, PoolingConfig};
use crate::video_io::{displayed_duration, PlayoutPattern, SpanKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Vqa,
    R1,
    R2,
    M,
    I,
}

impl Feature {
    /// Column order used by feature matrices and CSV files.
    pub const ALL: [Feature; 5] = [Feature::Vqa, Feature::R1, Feature::R2, Feature::M, Feature::I];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Vqa => "vqa",
            Feature::R1 => "r1",
            Feature::R2 => "r2",
            Feature::M => "m",
            Feature::I => "i",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Feature::Vqa => "VQA",
            Feature::R1 => "R1",
            Feature::R2 => "R2",
            Feature::M => "M",
            Feature::I => "I",
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vqa" => Ok(Feature::Vqa),
            "r1" => Ok(Feature::R1),
            "r2" => Ok(Feature::R2),
            "m" | "m_stall" => Ok(Feature::M),
            "i" => Ok(Feature::I),
            other => Err(Error::InvalidParameter(format!("unknown feature {other:?}"))),
        }
    }
}

/// A non-empty set of features, kept in canonical column order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSubset(Vec<Feature>);

impl TryFrom<Vec<Feature>> for FeatureSubset {
    type Error = Error;

    fn try_from(v: Vec<Feature>) -> Result<Self> {
        FeatureSubset::new(&v)
    }
}

impl From<FeatureSubset> for Vec<Feature> {
    fn from(s: FeatureSubset) -> Self {
        s.0
    }
}

/// Subsets in the order of the standard ablation table, 1-based.
const TABLE: [&[Feature]; 12] = [
    &[Feature::Vqa],
    &[Feature::M],
    &[Feature::I],
    &[Feature::R1, Feature::R2],
    &[Feature::Vqa, Feature::M],
    &[Feature::Vqa, Feature::I],
    &[Feature::Vqa, Feature::R2, Feature::M],
    &[Feature::R1, Feature::R2, Feature::M],
    &[Feature::R1, Feature::R2, Feature::M, Feature::I],
    &[Feature::Vqa, Feature::R1, Feature::R2, Feature::I],
    &[Feature::Vqa, Feature::R1, Feature::R2, Feature::M],
    &[Feature::Vqa, Feature::R1, Feature::R2, Feature::M, Feature::I],
];

impl FeatureSubset {
    pub fn new(features: &[Feature]) -> Result<Self> {
        let mut v = features.to_vec();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::InvalidParameter("feature subset must not be empty".into()));
        }
        Ok(FeatureSubset(v))
    }

    pub fn all() -> Self {
        FeatureSubset(Feature::ALL.to_vec())
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0.contains(&f)
    }

    /// Column indices into a full five-column feature matrix.
    pub fn columns(&self) -> Vec<usize> {
        self.0
            .iter()
            .map(|f| Feature::ALL.iter().position(|g| g == f).expect("known feature"))
            .collect()
    }

    /// Position of this subset in the ablation table (1-based), if listed.
    pub fn table_index(&self) -> Option<usize> {
        TABLE.iter().position(|t| *t == self.0.as_slice()).map(|i| i + 1)
    }

    pub fn from_table_index(index: usize) -> Result<Self> {
        TABLE
            .get(index.wrapping_sub(1))
            .map(|t| FeatureSubset(t.to_vec()))
            .ok_or_else(|| Error::InvalidParameter(format!("no feature subset with index {index}")))
    }

    pub fn table() -> Vec<FeatureSubset> {
        (1..=TABLE.len()).map(|i| Self::from_table_index(i).expect("in range")).collect()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|f| f.label()).collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|f| f.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = s
            .split([',', '+'])
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Feature>>>()?;
        FeatureSubset::new(&v)
    }
}

/// How the memory feature is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryVariant {
    /// Time since the last stall or bitrate drop ended.
    #[default]
    Rate,
    /// Time since the last stall ended, bitrate ignored.
    Stall,
}

impl FromStr for MemoryVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(MemoryVariant::Rate),
            "stall" => Ok(MemoryVariant::Stall),
            other => Err(Error::InvalidParameter(format!("unknown memory variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub vqa: f64,
    pub r1: f64,
    pub r2: f64,
    pub m: f64,
    pub i: f64,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Vqa => self.vqa,
            Feature::R1 => self.r1,
            Feature::R2 => self.r2,
            Feature::M => self.m,
            Feature::I => self.i,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.vqa, self.r1, self.r2, self.m, self.i]
    }

    pub fn select(&self, subset: &FeatureSubset) -> Vec<f64> {
        subset.features().iter().map(|&f| self.get(f)).collect()
    }
}

/// Trailing seconds at the reference bitrate with no stall, over displayed duration.
pub fn memory_rate(pattern: &PlayoutPattern) -> f64 {
    (trailing_clean_s(pattern, true) / displayed_duration(pattern)).min(1.0)
}

/// Trailing seconds since the last stall, over displayed duration; 1 without stalls.
pub fn extract_m_stall(pattern: &PlayoutPattern) -> f64 {
    if pattern.stall_count() == 0 {
        return 1.0;
    }
    (trailing_clean_s(pattern, false) / displayed_duration(pattern)).min(1.0)
}

fn trailing_clean_s(pattern: &PlayoutPattern, require_reference_rate: bool) -> f64 {
    let mut total = 0.0;
    for span in pattern.timeline().iter().rev() {
        match span.kind {
            SpanKind::Stall { .. } => break,
            SpanKind::Play { bitrate_kbps, .. } => {
                if require_reference_rate && bitrate_kbps < pattern.reference_bitrate_kbps {
                    break;
                }
                total += span.duration_s;
            }
        }
    }
    total
}

/// Played seconds below the reference bitrate, over displayed duration.
pub fn impairment_fraction(pattern: &PlayoutPattern) -> f64 {
    let low: f64 = pattern
        .timeline()
        .iter()
        .filter_map(|s| match s.kind {
            SpanKind::Play { bitrate_kbps, .. } if bitrate_kbps < pattern.reference_bitrate_kbps => {
                Some(s.duration_s)
            }
            _ => None,
        })
        .fold(0.0, |a, d| a + d);
    // span durations are summed separately from the denominator; clamp the rounding
    (low / displayed_duration(pattern)).min(1.0)
}

/// Stall-only features (everything except the pooled quality).
pub fn stall_features(pattern: &PlayoutPattern, memory: MemoryVariant) -> Result<(f64, f64, f64, f64)> {
    pattern.validate()?;
    let dur = displayed_duration(pattern);
    let r1 = pattern.total_stall_s() / dur;
    let r2 = pattern.stall_count() as f64;
    let m = match memory {
        MemoryVariant::Rate => memory_rate(pattern),
        MemoryVariant::Stall => extract_m_stall(pattern),
    };
    Ok((r1, r2, m, impairment_fraction(pattern)))
}

pub fn extract_features(ts: &QualityTimeSeries, pattern: &PlayoutPattern, pooling: &PoolingConfig) -> Result<FeatureVector> {
    extract_features_with(ts, pattern, pooling, MemoryVariant::Rate)
}

pub fn extract_features_with(
    ts: &QualityTimeSeries,
    pattern: &PlayoutPattern,
    pooling: &PoolingConfig,
    memory: MemoryVariant,
) -> Result<FeatureVector> {
    let (r1, r2, m, i) = stall_features(pattern, memory)?;
    let played = ts.stalled().iter().filter(|s| !**s).count();
    if played != pattern.source_frame_count {
        return Err(Error::AlignmentMismatch(format!(
            "series has {played} played frames, pattern {} plays {}",
            pattern.pattern_id, pattern.source_frame_count
        )));
    }
    let vqa = pool(ts, pooling, pattern.fps)?;
    Ok(FeatureVector { vqa, r1, r2, m, i })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadKind {
    #[default]
    Population,
    Sample,
}

/// Per-column affine standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(cols: usize) -> Self {
        Standardizer {
            mean: vec![0.0; cols],
            scale: vec![1.0; cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

pub fn standardize_fit(rows: &Matrix) -> Result<Standardizer> {
    standardize_fit_with(rows, SpreadKind::Population)
}

/// Column means and standard deviations; constant columns get scale 1.
pub fn standardize_fit_with(rows: &Matrix, kind: SpreadKind) -> Result<Standardizer> {
    let n = rows.rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let mut mean = Vec::with_capacity(rows.cols());
    let mut scale = Vec::with_capacity(rows.cols());
    let denom = match kind {
        SpreadKind::Population => n as f64,
        SpreadKind::Sample => (n - 1) as f64,
    };
    for j in 0..rows.cols() {
        let col = rows.column(j);
        let mu = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / denom;
        let sd = var.sqrt();
        mean.push(mu);
        scale.push(if sd <= 1e-12 * mu.abs().max(1.0) { 1.0 } else { sd });
    }
    Ok(Standardizer { mean, scale })
}

pub fn standardize_apply(s: &Standardizer, rows: &Matrix) -> Result<Matrix> {
    if rows.cols() != s.cols() {
        return Err(Error::ShapeMismatch(format!(
            "standardizer has {} columns, matrix has {}",
            s.cols(),
            rows.cols()
        )));
    }
    let mut data = Vec::with_capacity(rows.rows() * rows.cols());
    for r in rows.iter_rows() {
        data.extend(s.apply_row(r));
    }
    Matrix::new(rows.rows(), rows.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::PoolingMethod;
    use crate::video_io::{build_alignment, PlayoutEvent};
    use proptest::prelude::*;

    fn play(first: usize, last: usize, rate: f64) -> PlayoutEvent {
        PlayoutEvent::Play {
            first_src_frame: first,
            last_src_frame: last,
            bitrate_kbps: rate,
        }
    }

    fn stall(at: usize, d: f64) -> PlayoutEvent {
        PlayoutEvent::Stall {
            at_src_frame: at,
            duration_s: d,
        }
    }

    fn const_series(p: &PlayoutPattern, q: f64) -> QualityTimeSeries {
        let a = build_alignment(p).unwrap();
        let values = a.entries().iter().map(|e| (!e.stalled).then_some(q)).collect();
        QualityTimeSeries::new("q", true, values, a.stalled_mask()).unwrap()
    }

    #[test]
    fn clean_session() {
        let p = PlayoutPattern::clean("c", 5.0, 300, 3000.0).unwrap();
        let f = extract_features(&const_series(&p, 0.9), &p, &PoolingConfig::default()).unwrap();
        assert_eq!((f.r1, f.r2, f.m, f.i), (0.0, 0.0, 1.0, 0.0));
        assert!((f.vqa - 0.9).abs() < 1e-12);
    }

    #[test]
    fn one_mid_stall() {
        let p = PlayoutPattern::new(
            "s",
            5.0,
            300,
            3000.0,
            vec![play(0, 149, 3000.0), stall(150, 6.0), play(150, 299, 3000.0)],
        )
        .unwrap();
        let f = extract_features(&const_series(&p, 1.0), &p, &PoolingConfig::default()).unwrap();
        assert!((f.r1 - 6.0 / 66.0).abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
        assert!((f.m - 30.0 / 66.0).abs() < 1e-12);
        assert_eq!(f.i, 0.0);
    }

    #[test]
    fn low_final_segment_zeroes_memory() {
        let p = PlayoutPattern::new("l", 5.0, 100, 3000.0, vec![play(0, 49, 3000.0), play(50, 99, 750.0)]).unwrap();
        let f = extract_features(&const_series(&p, 1.0), &p, &PoolingConfig::default()).unwrap();
        assert_eq!(f.m, 0.0);
        assert!((f.i - 0.5).abs() < 1e-12);
    }

    #[test]
    fn m_stall_examples() {
        let p = PlayoutPattern::clean("c", 5.0, 50, 3000.0).unwrap();
        assert_eq!(extract_m_stall(&p), 1.0);
        let p = PlayoutPattern::new("h", 5.0, 50, 3000.0, vec![play(0, 24, 500.0), stall(25, 5.0), play(25, 49, 500.0)]).unwrap();
        assert!((extract_m_stall(&p) - 5.0 / 15.0).abs() < 1e-12);
        assert_eq!(memory_rate(&p), 0.0);
    }

    #[test]
    fn two_level_no_stall_complementary() {
        for cut in [1usize, 17, 50, 99] {
            let p = PlayoutPattern::new(
                "t",
                5.0,
                100,
                3000.0,
                vec![play(0, cut - 1, 1000.0), play(cut, 99, 3000.0)],
            )
            .unwrap();
            let (_, _, m, i) = stall_features(&p, MemoryVariant::Rate).unwrap();
            assert!((m + i - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn series_mismatch_rejected() {
        let p = PlayoutPattern::clean("c", 5.0, 10, 3000.0).unwrap();
        let ts = QualityTimeSeries::from_scores("q", true, &[1.0; 9]).unwrap();
        assert!(extract_features(&ts, &p, &PoolingConfig::default()).is_err());
    }

    #[test]
    fn pooling_is_selected() {
        let p = PlayoutPattern::clean("c", 1.0, 5, 3000.0).unwrap();
        let ts = QualityTimeSeries::from_scores("q", true, &[10.0, 10.0, 2.0, 10.0, 10.0]).unwrap();
        let mean = extract_features(&ts, &p, &PoolingConfig::new(PoolingMethod::Mean)).unwrap();
        let hyst = extract_features(&ts, &p, &PoolingConfig::new(PoolingMethod::Hysteresis)).unwrap();
        assert!((mean.vqa - 8.4).abs() < 1e-12);
        assert!((hyst.vqa - 5.68).abs() < 1e-9);
    }

    #[test]
    fn standardizer_examples() {
        let s = standardize_fit(&Matrix::column_vector(&[0.0, 2.0])).unwrap();
        assert_eq!((s.mean[0], s.scale[0]), (1.0, 1.0));
        let c = Matrix::column_vector(&[3.0, 3.0, 3.0]);
        let s = standardize_fit(&c).unwrap();
        assert_eq!((s.mean[0], s.scale[0]), (3.0, 1.0));
        assert_eq!(standardize_apply(&s, &c).unwrap().column(0), vec![0.0; 3]);
        let s = standardize_fit(&Matrix::column_vector(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.mean[0], 2.0);
        assert!((s.scale[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let s = standardize_fit_with(&Matrix::column_vector(&[1.0, 2.0, 3.0]), SpreadKind::Sample).unwrap();
        assert!((s.scale[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            standardize_fit(&Matrix::column_vector(&[1.0])),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn standardizer_apply() {
        let s = Standardizer { mean: vec![1.0], scale: vec![2.0] };
        assert_eq!(standardize_apply(&s, &Matrix::column_vector(&[5.0])).unwrap().get(0, 0), 2.0);
        let train = Matrix::from_rows(&[[1.0, 5.0], [2.0, 7.0], [6.0, 1.0]]).unwrap();
        let s = standardize_fit(&train).unwrap();
        let z = standardize_apply(&s, &train).unwrap();
        for j in 0..2 {
            assert!(z.column(j).iter().sum::<f64>().abs() < 1e-12);
        }
        assert_eq!(s.apply_row(&s.mean.clone()), vec![0.0, 0.0]);
        assert!(standardize_apply(&s, &Matrix::column_vector(&[1.0])).is_err());
    }

    #[test]
    fn subsets() {
        let s: FeatureSubset = "vqa,m,i,r1,r2".parse().unwrap();
        assert_eq!(s, FeatureSubset::all());
        assert_eq!(s.table_index(), Some(12));
        assert_eq!("vqa".parse::<FeatureSubset>().unwrap().table_index(), Some(1));
        assert_eq!("m,vqa,r2".parse::<FeatureSubset>().unwrap().table_index(), Some(7));
        assert_eq!(FeatureSubset::from_table_index(4).unwrap().label(), "R1+R2");
        assert_eq!("m,vqa,r2".parse::<FeatureSubset>().unwrap().columns(), vec![0, 2, 3]);
        assert!("".parse::<FeatureSubset>().is_err());
        assert!("vqa,x".parse::<FeatureSubset>().is_err());
        assert_eq!(FeatureSubset::table().len(), 12);
    }

    fn arb_pattern() -> impl Strategy<Value = PlayoutPattern> {
        (
            10usize..80,
            prop::collection::vec((0usize..80, 0.2f64..4.0), 0..4),
            prop::collection::vec((0usize..80, 0usize..3), 0..4),
        )
            .prop_map(|(n, stalls, drops)| {
                let ladder = [500.0, 1500.0, 3000.0];
                let mut cuts: Vec<usize> = drops.iter().map(|d| d.0 % n).collect();
                cuts.extend(stalls.iter().map(|s| s.0 % n));
                cuts.push(0);
                cuts.sort();
                cuts.dedup();
                let mut events = Vec::new();
                for (k, &c) in cuts.iter().enumerate() {
                    if let Some(s) = stalls.iter().find(|s| s.0 % n == c) {
                        events.push(stall(c, s.1));
                    }
                    let end = cuts.get(k + 1).copied().unwrap_or(n);
                    let rate = ladder[drops.get(k).map_or(2, |d| d.1)];
                    events.push(play(c, end - 1, rate));
                }
                PlayoutPattern::new("p", 5.0, n, 3000.0, events).unwrap()
            })
    }

    proptest! {
        #[test]
        fn feature_ranges(p in arb_pattern()) {
            for variant in [MemoryVariant::Rate, MemoryVariant::Stall] {
                let (r1, r2, m, i) = stall_features(&p, variant).unwrap();
                for v in [r1, m, i] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert_eq!(r2.fract(), 0.0);
                prop_assert_eq!(r2 == 0.0, r1 == 0.0);
                if r2 > 0.0 {
                    prop_assert!(m <= 1.0 - r1 + 1e-12);
                }
                prop_assert!(r1 + i <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn trailing_max_segment_grows_memory(p in arb_pattern(), extra in 1usize..20) {
            let (r1, _, m, i) = stall_features(&p, MemoryVariant::Rate).unwrap();
            let n = p.source_frame_count;
            let mut q = p.clone();
            q.source_frame_count = n + extra;
            q.events.push(play(n, n + extra - 1, 3000.0));
            let (r1b, _, mb, ib) = stall_features(&q, MemoryVariant::Rate).unwrap();
            if m < 1.0 - 1e-12 {
                prop_assert!(mb > m);
            } else {
                prop_assert!((mb - 1.0).abs() < 1e-12);
            }
            prop_assert!(r1b <= r1);
            prop_assert!(ib <= i);
        }
    }
}
