//! Session collections: per-session features with MOS, feature CSV files and
//! the dataset manifest.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSubset, FeatureVector, MemoryVariant};
use crate::linalg::Matrix;

pub const FEATURE_CSV_HEADER: &str = "content_id,pattern_id,vqa,r1,r2,m,i,mos";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoESample {
    pub content_id: String,
    pub pattern_id: String,
    pub features: FeatureVector,
    pub mos: f64,
}

/// Extracted features for a set of sessions, with the facts the evaluation
/// protocols need about how they were produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoEDataset {
    pub samples: Vec<QoESample>,
    /// Polarity of the pooled quality feature.
    pub higher_is_better: bool,
    pub memory: MemoryVariant,
    /// Whether any session plays below the reference bitrate; without it the
    /// rate-based memory and impairment features carry no information.
    pub bitrate_variation: bool,
}

impl QoEDataset {
    pub fn new(samples: Vec<QoESample>, higher_is_better: bool) -> Self {
        let bitrate_variation = samples.iter().any(|s| s.features.i > 0.0);
        QoEDataset {
            samples,
            higher_is_better,
            memory: MemoryVariant::Rate,
            bitrate_variation,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sorted distinct content ids.
    pub fn contents(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.samples.iter().map(|s| s.content_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Sorted distinct pattern ids.
    pub fn patterns(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.samples.iter().map(|s| s.pattern_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn matrix(&self, subset: &FeatureSubset) -> Matrix {
        let rows: Vec<Vec<f64>> = self.samples.iter().map(|s| s.features.select(subset)).collect();
        if rows.is_empty() {
            return Matrix::zeros(0, subset.len());
        }
        Matrix::from_rows(&rows).expect("rows share the subset width")
    }

    pub fn mos(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mos).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> QoEDataset {
        QoEDataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> QoEDataset {
        QoEDataset {
            samples: Vec::new(),
            higher_is_better: self.higher_is_better,
            memory: self.memory,
            bitrate_variation: self.bitrate_variation,
        }
    }

    pub fn check_mos_bounds(&self, lo: f64, hi: f64) -> Result<()> {
        if let Some(s) = self.samples.iter().find(|s| !(lo..=hi).contains(&s.mos)) {
            return Err(Error::InvalidParameter(format!(
                "session {}/{} has MOS {} outside [{lo}, {hi}]",
                s.content_id, s.pattern_id, s.mos
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FEATURE_CSV_HEADER.split(','))?;
        for s in &self.samples {
            let f = &s.features;
            w.write_record([
                s.content_id.clone(),
                s.pattern_id.clone(),
                f.vqa.to_string(),
                f.r1.to_string(),
                f.r2.to_string(),
                f.m.to_string(),
                f.i.to_string(),
                s.mos.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a feature CSV. Polarity and memory variant are not stored in the
    /// file and must be supplied.
    pub fn read_csv<R: Read>(input: R, higher_is_better: bool, memory: MemoryVariant) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let expected: Vec<&str> = FEATURE_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidParameter(format!(
                "feature csv header must be {FEATURE_CSV_HEADER:?}"
            )));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |k: usize| -> Result<f64> {
                let raw = &rec[k];
                raw.parse().map_err(|_| Error::BadScore {
                    line,
                    value: raw.to_string(),
                })
            };
            samples.push(QoESample {
                content_id: rec[0].to_string(),
                pattern_id: rec[1].to_string(),
                features: FeatureVector {
                    vqa: num(2)?,
                    r1: num(3)?,
                    r2: num(4)?,
                    m: num(5)?,
                    i: num(6)?,
                },
                mos: num(7)?,
            });
        }
        let bitrate_variation = samples.iter().any(|s| s.features.i > 0.0);
        Ok(QoEDataset {
            samples,
            higher_is_better,
            memory,
            bitrate_variation,
        })
    }
}

/// One session of a dataset manifest. Relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub content_id: String,
    pub pattern_id: String,
    pub pattern_file: PathBuf,
    pub mos: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_video: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_video: Option<PathBuf>,
}

impl SessionEntry {
    pub fn session_id(&self) -> String {
        format!("{}/{}", self.content_id, self.pattern_id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos_bounds: Option<[f64; 2]>,
    pub sessions: Vec<SessionEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestFile {
    List(Vec<SessionEntry>),
    Object(Manifest),
}

impl Manifest {
    /// Accepts either a bare list of sessions or an object with `sessions`.
    pub fn from_json_str(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m = match serde_json::from_str::<ManifestFile>(s)? {
            ManifestFile::List(sessions) => Manifest {
                width: None,
                height: None,
                mos_bounds: None,
                sessions,
                base_dir: PathBuf::new(),
            },
            ManifestFile::Object(m) => m,
        };
        m.base_dir = base_dir.into();
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&s, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(c: &str, p: &str, x: f64) -> QoESample {
        QoESample {
            content_id: c.into(),
            pattern_id: p.into(),
            features: FeatureVector { vqa: x, r1: 0.1, r2: 1.0, m: 0.25, i: 1.0 / 3.0 },
            mos: 40.0 + x,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = QoEDataset::new(vec![sample("c1", "p1", 0.1 + 0.2), sample("c0", "p2", 7.0)], true);
        let text = ds.to_csv_string();
        assert!(text.starts_with("content_id,pattern_id,vqa,r1,r2,m,i,mos\n"));
        let back = QoEDataset::read_csv(text.as_bytes(), true, MemoryVariant::Rate).unwrap();
        assert_eq!(back.samples, ds.samples);
        assert_eq!(back.contents(), vec!["c0".to_string(), "c1".to_string()]);
    }

    #[test]
    fn manifest_forms() {
        let list = r#"[{"content_id":"a","pattern_id":"p","pattern_file":"p.json","mos":50,"dist_video":"d.yuv","ref_video":"r.yuv"}]"#;
        let m = Manifest::from_json_str(list, "/data").unwrap();
        assert_eq!(m.sessions.len(), 1);
        assert_eq!(m.resolve(&m.sessions[0].pattern_file), PathBuf::from("/data/p.json"));
        let obj = r#"{"width":64,"height":64,"sessions":[{"content_id":"a","pattern_id":"p","pattern_file":"/abs/p.json","mos":50,"scores_csv":"s.csv"}]}"#;
        let m = Manifest::from_json_str(obj, "/data").unwrap();
        assert_eq!(m.width, Some(64));
        assert_eq!(m.resolve(&m.sessions[0].pattern_file), PathBuf::from("/abs/p.json"));
    }

    #[test]
    fn mos_bounds() {
        let ds = QoEDataset::new(vec![sample("c", "p", 30.0)], true);
        assert!(ds.check_mos_bounds(0.0, 100.0).is_ok());
        assert!(ds.check_mos_bounds(0.0, 5.0).is_err());
    }
}
