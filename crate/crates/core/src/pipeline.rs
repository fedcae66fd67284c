//! End-to-end commands over a run configuration: feature extraction from a
//! manifest, training, prediction, the evaluation protocols, significance
//! testing, sweeps and synthetic data generation. Every command writes its
//! artifacts under the configured output directory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baselines::{
    default_baseline_grid, score_baseline, tune_baseline, BaselineKind, BaselineParams, BaselineSession, FtwParams,
    SqiParams, VsqmParams,
};
use crate::dataset::{Manifest, QoEDataset, QoESample};
use crate::error::{Error, Result};
use crate::eval::{
    before_regression, gen_content_splits, median, ranksum_significance, run_cross_dataset, run_experiment1,
    run_experiment2, srocc, train_fraction_sweep, EvalConfig, EvalReport, SignificanceMatrix, SplitMatrix,
};
use crate::features::{extract_features_with, FeatureSubset, MemoryVariant};
use crate::io::write_atomic;
use crate::metrics::{ingest_scores, score_sequence, Metric, QualityTimeSeries};
use crate::pooling::PoolingConfig;
use crate::regress::{grid_search_cv, predict, train, CvCriterion, HyperGrid, Hyperparams, ModelKind, TrainedModel};
use crate::synth::{SynthConfig, SynthData};
use crate::video_io::{build_alignment, read_yuv, FrameSequence, PlayoutPattern};

/// Where per-frame quality comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MetricSource {
    Native(Metric),
    /// Externally computed scores listed per session in the manifest.
    Csv,
}

impl fmt::Display for MetricSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSource::Native(m) => f.write_str(m.name()),
            MetricSource::Csv => f.write_str("csv"),
        }
    }
}

impl FromStr for MetricSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("csv") {
            Ok(MetricSource::Csv)
        } else {
            s.parse().map(MetricSource::Native)
        }
    }
}

impl TryFrom<String> for MetricSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MetricSource> for String {
    fn from(m: MetricSource) -> Self {
        m.to_string()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    /// Content-disjoint random splits.
    #[default]
    #[serde(rename = "1")]
    ContentSplits,
    /// Leave one playout pattern out.
    #[serde(rename = "2")]
    PatternHoldout,
    /// Train on one dataset, test on another.
    #[serde(rename = "cross")]
    Cross,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Experiment::ContentSplits),
            "2" => Ok(Experiment::PatternHoldout),
            "cross" => Ok(Experiment::Cross),
            other => Err(Error::InvalidParameter(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Optional replacement tuning grids for the baselines.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineGrids {
    pub ftw: Option<Vec<FtwParams>>,
    pub vsqm: Option<Vec<VsqmParams>>,
    pub sqi: Option<Vec<SqiParams>>,
}

impl BaselineGrids {
    pub fn grid(&self, kind: BaselineKind) -> Vec<BaselineParams> {
        let base = BaselineParams::default();
        match kind {
            BaselineKind::Ftw => self.ftw.as_ref().map(|g| {
                g.iter()
                    .map(|&ftw| BaselineParams { ftw, ..base.clone() })
                    .collect()
            }),
            BaselineKind::Vsqm => self.vsqm.as_ref().map(|g| {
                g.iter()
                    .map(|v| BaselineParams {
                        vsqm: v.clone(),
                        ..base.clone()
                    })
                    .collect()
            }),
            BaselineKind::Sqi => self.sqi.as_ref().map(|g| {
                g.iter()
                    .map(|&sqi| BaselineParams { sqi, ..base.clone() })
                    .collect()
            }),
        }
        .unwrap_or_else(|| default_baseline_grid(kind))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// A feature table to use instead of extracting from `manifest`.
    pub features_csv: Option<PathBuf>,
    /// Test side of a cross-dataset run.
    pub test_manifest: Option<PathBuf>,
    pub test_features_csv: Option<PathBuf>,
    /// Frame size for manifests that do not state one.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub metric: MetricSource,
    /// Polarity of externally computed scores.
    pub csv_higher_is_better: bool,
    pub pooling: PoolingConfig,
    pub memory: MemoryVariant,
    pub regressor: ModelKind,
    /// Replaces the stock hyperparameter grid.
    pub grid: Option<Vec<Hyperparams>>,
    /// Comma-separated feature names; all five when unset.
    pub features: Option<String>,
    pub experiment: Experiment,
    pub trials: usize,
    pub train_fraction: f64,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub cv_folds: usize,
    pub cv_criterion: CvCriterion,
    pub seed: u64,
    pub alpha: f64,
    /// Methods for the significance matrix: regressor names, `br`, or baselines.
    pub compare: Vec<String>,
    /// Existing report files to compare instead of running `compare`.
    pub reports: Vec<PathBuf>,
    pub model: Option<PathBuf>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub synth: SynthConfig,
    pub baselines: BaselineGrids,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            features_csv: None,
            test_manifest: None,
            test_features_csv: None,
            width: None,
            height: None,
            metric: MetricSource::Native(Metric::MsSsim),
            csv_higher_is_better: true,
            pooling: PoolingConfig::default(),
            memory: MemoryVariant::Rate,
            regressor: ModelKind::Svr,
            grid: None,
            features: None,
            experiment: Experiment::ContentSplits,
            trials: 1000,
            train_fraction: 0.8,
            fractions: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            repetitions: crate::eval::DEFAULT_CROSS_REPETITIONS,
            cv_folds: crate::eval::DEFAULT_CV_FOLDS,
            cv_criterion: CvCriterion::Mse,
            seed: 0,
            alpha: 0.01,
            compare: ["ridge", "lasso", "svr", "rf", "et", "gb", "br", "ftw", "vsqm", "sqi"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            reports: Vec::new(),
            model: None,
            threads: None,
            out: PathBuf::from("out"),
            synth: SynthConfig::default(),
            baselines: BaselineGrids::default(),
        }
    }
}

fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(o) => o,
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut().expect("just made an object")
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "config key {key:?}: {:?} is not a section",
                    parts[..k].join(".")
                )))
            }
        };
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl RunConfig {
    /// Defaults, then the config file's dotted keys, then `overrides` in order.
    pub fn layered(file: Option<&Map<String, Value>>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut root = serde_json::to_value(RunConfig::default())?;
        for (k, v) in file.into_iter().flatten() {
            set_dotted(&mut root, k, v.clone())?;
        }
        for (k, v) in overrides {
            set_dotted(&mut root, k, v.clone())?;
        }
        let cfg: RunConfig = serde_json::from_value(root)?;
        cfg.pooling.validate()?;
        cfg.subset()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                match serde_json::from_str::<Value>(&text)? {
                    Value::Object(m) => Some(m),
                    _ => return Err(Error::InvalidParameter(format!("{} is not a JSON object", p.display()))),
                }
            }
            None => None,
        };
        Self::layered(file.as_ref(), overrides)
    }

    pub fn subset(&self) -> Result<FeatureSubset> {
        match &self.features {
            Some(s) => s.parse(),
            None => Ok(FeatureSubset::all()),
        }
    }

    fn higher_is_better(&self) -> bool {
        match self.metric {
            MetricSource::Native(m) => m.higher_is_better(),
            MetricSource::Csv => self.csv_higher_is_better,
        }
    }

    fn eval_config(&self, regressor: ModelKind) -> Result<EvalConfig> {
        let subset = self.subset()?;
        Ok(EvalConfig {
            regressor,
            grid: match (&self.grid, regressor == self.regressor) {
                (Some(g), true) => Some(HyperGrid::new(g.clone())?),
                _ => None,
            },
            subset,
            cv_folds: self.cv_folds,
            cv_criterion: self.cv_criterion,
            seed: self.seed,
            metric_label: self.metric.to_string(),
            pooling_label: self.pooling.method.name().to_string(),
        })
    }
}

/// Features and MOS for one manifest, plus what the baselines need.
pub struct LoadedDataset {
    pub dataset: QoEDataset,
    /// Present when built from a manifest.
    pub sessions: Option<Vec<BaselineSession>>,
}

fn session_series(
    manifest: &Manifest,
    entry: &crate::dataset::SessionEntry,
    pattern: &PlayoutPattern,
    metric: MetricSource,
    csv_hib: bool,
    refs: &HashMap<PathBuf, FrameSequence>,
) -> Result<QualityTimeSeries> {
    let align = build_alignment(pattern)?;
    match metric {
        MetricSource::Csv => {
            let p = entry
                .scores_csv
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("csv metric needs scores_csv".into()))?;
            ingest_scores(manifest.resolve(p), &align, "csv", csv_hib)
        }
        MetricSource::Native(m) => {
            let (w, h) = frame_size(manifest)?;
            let rp = manifest.resolve(
                entry
                    .ref_video
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("native metrics need ref_video".into()))?,
            );
            let dp = manifest.resolve(
                entry
                    .dist_video
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("native metrics need dist_video".into()))?,
            );
            let reference = match refs.get(&rp) {
                Some(r) => r.clone(),
                None => read_yuv(&rp, w, h, pattern.fps)?,
            };
            let dist = read_yuv(&dp, w, h, pattern.fps)?;
            score_sequence(&reference, &dist, &align, m)
        }
    }
}

fn frame_size(manifest: &Manifest) -> Result<(usize, usize)> {
    match (manifest.width, manifest.height) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(Error::InvalidParameter("manifest needs width and height for raw video".into())),
    }
}

/// Extracts features for every session of a manifest, in manifest order.
pub fn dataset_from_manifest(
    manifest: &Manifest,
    metric: MetricSource,
    csv_hib: bool,
    pooling: &PoolingConfig,
    memory: MemoryVariant,
) -> Result<LoadedDataset> {
    // Each reference is read once and shared by all sessions that use it.
    let mut refs = HashMap::new();
    if let MetricSource::Native(_) = metric {
        let (w, h) = frame_size(manifest)?;
        let mut paths: Vec<PathBuf> = manifest
            .sessions
            .iter()
            .filter_map(|s| s.ref_video.as_ref().map(|p| manifest.resolve(p)))
            .collect();
        paths.sort();
        paths.dedup();
        let loaded: Vec<(PathBuf, FrameSequence)> = paths
            .into_par_iter()
            .filter_map(|p| read_yuv(&p, w, h, 1.0).ok().map(|r| (p, r)))
            .collect();
        refs.extend(loaded);
    }
    let per_session = manifest
        .sessions
        .par_iter()
        .map(|entry| {
            let run = || -> Result<(QoESample, BaselineSession)> {
                let pattern = PlayoutPattern::from_json_file(manifest.resolve(&entry.pattern_file))?;
                let ts = session_series(manifest, entry, &pattern, metric, csv_hib, &refs)?;
                let features = extract_features_with(&ts, &pattern, pooling, memory)?;
                let sample = QoESample {
                    content_id: entry.content_id.clone(),
                    pattern_id: entry.pattern_id.clone(),
                    features,
                    mos: entry.mos,
                };
                Ok((
                    sample,
                    BaselineSession {
                        pattern,
                        series: Some(ts),
                        mos: entry.mos,
                    },
                ))
            };
            run().map_err(|e| e.in_session(entry.session_id()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (samples, sessions): (Vec<_>, Vec<_>) = per_session.into_iter().unzip();
    let hib = match metric {
        MetricSource::Native(m) => m.higher_is_better(),
        MetricSource::Csv => csv_hib,
    };
    let mut dataset = QoEDataset::new(samples, hib);
    dataset.memory = memory;
    if let Some([lo, hi]) = manifest.mos_bounds {
        dataset.check_mos_bounds(lo, hi)?;
    }
    Ok(LoadedDataset {
        dataset,
        sessions: Some(sessions),
    })
}

fn load_side(cfg: &RunConfig, manifest: Option<&PathBuf>, csv: Option<&PathBuf>, memory: MemoryVariant) -> Result<LoadedDataset> {
    if let Some(p) = csv {
        let f = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
        return Ok(LoadedDataset {
            dataset: QoEDataset::read_csv(f, cfg.higher_is_better(), memory)?,
            sessions: None,
        });
    }
    let p = manifest.ok_or_else(|| Error::InvalidParameter("no manifest or feature table configured".into()))?;
    let mut m = Manifest::load(p)?;
    m.width = m.width.or(cfg.width);
    m.height = m.height.or(cfg.height);
    dataset_from_manifest(&m, cfg.metric, cfg.csv_higher_is_better, &cfg.pooling, memory)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<LoadedDataset> {
    load_side(cfg, cfg.manifest.as_ref(), cfg.features_csv.as_ref(), cfg.memory)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub fn cmd_features(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?.dataset;
    let p = out_path(cfg, "features.csv");
    write(&p, &ds.to_csv_string())?;
    Ok(vec![p])
}

/// Cross-validates the grid on the whole table and fits once.
pub fn train_on(ds: &QoEDataset, cfg: &RunConfig) -> Result<TrainedModel> {
    let subset = cfg.subset()?;
    let x = ds.matrix(&subset);
    let y = ds.mos();
    let hp = if cfg.regressor == ModelKind::Identity {
        Hyperparams::Identity {
            higher_is_better: ds.higher_is_better,
        }
    } else {
        let grid = match &cfg.grid {
            Some(g) => HyperGrid::new(g.clone())?,
            None => HyperGrid::default_for(cfg.regressor),
        };
        if grid.len() == 1 {
            grid.candidates[0]
        } else {
            let k = cfg.cv_folds.min(x.rows());
            grid_search_cv(&x, &y, &subset, &grid, k, cfg.seed, cfg.cv_criterion)?.best
        }
    };
    train(&x, &y, &hp, &subset, cfg.seed)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?.dataset;
    let model = train_on(&ds, cfg)?;
    let p = out_path(cfg, "model.json");
    model.save(&p)?;
    Ok(vec![p])
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mp = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("predict needs a model file".into()))?;
    let model = TrainedModel::load(mp)?;
    if cfg.features.is_some() && cfg.subset()? != model.feature_mask {
        return Err(Error::FeatureSubsetMismatch(format!(
            "model uses {}, configuration asks for {}",
            model.feature_mask,
            cfg.subset()?
        )));
    }
    let ds = load_dataset(cfg)?.dataset;
    let pred = predict(&model, &ds.matrix(&model.feature_mask))?;
    let mut s = String::from("content_id,pattern_id,prediction,mos\n");
    for (sample, p) in ds.samples.iter().zip(pred) {
        s.push_str(&format!("{},{},{},{}\n", sample.content_id, sample.pattern_id, p, sample.mos));
    }
    let p = out_path(cfg, "predictions.csv");
    write(&p, &s)?;
    Ok(vec![p])
}

fn write_report(cfg: &RunConfig, stem: &str, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let json = out_path(cfg, &format!("{stem}_report.json"));
    let csv = out_path(cfg, &format!("{stem}_trials.csv"));
    write(&json, &report.to_json_string())?;
    write(&csv, &report.trials_csv_string())?;
    Ok(vec![json, csv])
}

fn content_splits(cfg: &RunConfig, ds: &QoEDataset) -> Result<SplitMatrix> {
    gen_content_splits(&ds.contents(), cfg.train_fraction, cfg.trials, cfg.seed)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ecfg = cfg.eval_config(cfg.regressor)?;
    match cfg.experiment {
        Experiment::ContentSplits => {
            let ds = load_dataset(cfg)?.dataset;
            let splits = content_splits(cfg, &ds)?;
            let report = run_experiment1(&ds, &splits, &ecfg)?;
            let mut files = write_report(cfg, "exp1", &report)?;
            let sp = out_path(cfg, "exp1_splits.json");
            write(&sp, &serde_json::to_string_pretty(&splits)?)?;
            files.push(sp);
            Ok(files)
        }
        Experiment::PatternHoldout => {
            let ds = load_dataset(cfg)?.dataset;
            write_report(cfg, "exp2", &run_experiment2(&ds, &ecfg)?)
        }
        Experiment::Cross => {
            if cfg.test_manifest.is_none() && cfg.test_features_csv.is_none() {
                return Err(Error::InvalidParameter("cross-dataset runs need a test manifest or feature table".into()));
            }
            let load = |memory| -> Result<(QoEDataset, QoEDataset)> {
                Ok((
                    load_side(cfg, cfg.manifest.as_ref(), cfg.features_csv.as_ref(), memory)?.dataset,
                    load_side(cfg, cfg.test_manifest.as_ref(), cfg.test_features_csv.as_ref(), memory)?.dataset,
                ))
            };
            let (mut a, mut b) = load(cfg.memory)?;
            let from_videos = cfg.features_csv.is_none() && cfg.test_features_csv.is_none();
            if !(a.bitrate_variation && b.bitrate_variation) && cfg.memory == MemoryVariant::Rate && from_videos {
                log::info!("a dataset has no bitrate variation; using the stall-based memory feature");
                (a, b) = load(MemoryVariant::Stall)?;
            }
            write_report(cfg, "cross", &run_cross_dataset(&a, &b, &ecfg, cfg.repetitions)?)
        }
    }
}

/// Per-trial SROCC of a tuned baseline on the test contents of each split.
pub fn baseline_trials(
    ds: &QoEDataset,
    sessions: &[BaselineSession],
    splits: &SplitMatrix,
    kind: BaselineKind,
    grid: &[BaselineParams],
) -> Result<Vec<f64>> {
    splits
        .trials
        .par_iter()
        .map(|s| {
            let pick = |ids: &[String]| -> Vec<usize> {
                (0..ds.len())
                    .filter(|&i| ids.binary_search(&ds.samples[i].content_id).is_ok())
                    .collect()
            };
            let train_rows: Vec<BaselineSession> = pick(&s.train).into_iter().map(|i| sessions[i].clone()).collect();
            let test_rows = pick(&s.test);
            let params = tune_baseline(&train_rows, kind, grid)?;
            let scores = test_rows
                .iter()
                .map(|&i| score_baseline(kind, &sessions[i], &params))
                .collect::<Result<Vec<f64>>>()?;
            let mos: Vec<f64> = test_rows.iter().map(|&i| ds.samples[i].mos).collect();
            Ok(srocc(&scores, &mos).unwrap_or(f64::NAN))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub medians: Vec<(String, Option<f64>)>,
    pub matrix: SignificanceMatrix,
}

pub fn cmd_significance(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let methods: Vec<(String, Vec<f64>)> = if !cfg.reports.is_empty() {
        cfg.reports
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let r: EvalReport = serde_json::from_str(&text)?;
                let name = p.file_stem().map_or_else(|| r.config.regressor.clone(), |s| s.to_string_lossy().into_owned());
                Ok((name, r.trial_sroccs()))
            })
            .collect::<Result<_>>()?
    } else {
        let loaded = load_dataset(cfg)?;
        let ds = &loaded.dataset;
        let splits = content_splits(cfg, ds)?;
        let mut out = Vec::new();
        for name in &cfg.compare {
            let v = if name == "br" {
                before_regression(ds, &splits).into_iter().map(|r| r.0.unwrap_or(f64::NAN)).collect()
            } else if let Ok(kind) = name.parse::<BaselineKind>() {
                let sessions = loaded
                    .sessions
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter(format!("{name} needs sessions from a manifest")))?;
                baseline_trials(ds, sessions, &splits, kind, &cfg.baselines.grid(kind))?
            } else {
                let kind: ModelKind = name.parse()?;
                run_experiment1(ds, &splits, &cfg.eval_config(kind)?)?.trial_sroccs()
            };
            out.push((name.clone(), v));
        }
        out
    };
    let matrix = ranksum_significance(&methods, cfg.alpha)?;
    let report = SignificanceReport {
        medians: methods.iter().map(|(n, v)| (n.clone(), median(v))).collect(),
        matrix,
    };
    let json = out_path(cfg, "significance.json");
    let csv = out_path(cfg, "significance.csv");
    write(&json, &serde_json::to_string_pretty(&report)?)?;
    write(&csv, &report.matrix.to_csv_string())?;
    Ok(vec![json, csv])
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(cfg)?.dataset;
    let report = train_fraction_sweep(&ds, &cfg.fractions, cfg.trials, &cfg.eval_config(cfg.regressor)?)?;
    let json = out_path(cfg, "sweep.json");
    let dat = out_path(cfg, "sweep.dat");
    write(&json, &report.to_json_string())?;
    write(&dat, &report.to_dat_string())?;
    Ok(vec![json, dat])
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = SynthData::generate(&cfg.synth)?;
    Ok(vec![data.write(&cfg.out)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_keys_and_overrides() {
        let file = json!({"metric": "gmsd", "pooling.method": "vq", "pooling.hysteresis.tau_s": 3.0, "synth.n_contents": 4});
        let cfg = RunConfig::layered(file.as_object(), &[("metric".into(), json!("psnr"))]).unwrap();
        assert_eq!(cfg.metric, MetricSource::Native(Metric::Psnr));
        assert_eq!(cfg.pooling.method, crate::pooling::PoolingMethod::Vq);
        assert_eq!(cfg.pooling.hysteresis.tau_s, 3.0);
        assert_eq!(cfg.synth.n_contents, 4);
        assert_eq!(cfg.trials, 1000);
    }

    #[test]
    fn bad_keys_rejected() {
        assert!(RunConfig::layered(json!({"metirc": "psnr"}).as_object(), &[]).is_err());
        assert!(RunConfig::layered(json!({"trials.x": 3}).as_object(), &[]).is_err());
        assert!(RunConfig::layered(None, &[("regressor".into(), json!("xgb"))]).is_err());
        assert!(RunConfig::layered(None, &[("features".into(), json!("vqa,q"))]).is_err());
        assert!(RunConfig::layered(None, &[("experiment".into(), json!("cross"))]).is_ok());
    }

    #[test]
    fn metric_source_names() {
        for s in ["psnr", "ssim", "msssim", "gmsd", "csv"] {
            assert_eq!(s.parse::<MetricSource>().unwrap().to_string(), s);
        }
    }
}
