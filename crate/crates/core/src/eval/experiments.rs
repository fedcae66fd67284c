//! The evaluation protocols: content-split trials, leave-one-pattern-out,
//! cross-dataset transfer and the training-size sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::splits::{gen_content_splits, train_count, Split, SplitMatrix};
use super::stats::{lcc_after_logistic, median, srocc};
use crate::dataset::QoEDataset;
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureSubset, MemoryVariant};
use crate::regress::{
    feature_importances, grid_search_cv, predict, train, CvCriterion, HyperGrid, Hyperparams, ModelKind, TrainedModel,
};
use crate::rng;

pub const DEFAULT_CV_FOLDS: usize = 10;
pub const DEFAULT_CROSS_REPETITIONS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub regressor: ModelKind,
    /// Candidate grid; the stock grid for the regressor when `None`.
    pub grid: Option<HyperGrid>,
    pub subset: FeatureSubset,
    pub cv_folds: usize,
    pub cv_criterion: CvCriterion,
    pub seed: u64,
    /// Echoed into reports only.
    pub metric_label: String,
    pub pooling_label: String,
}

impl EvalConfig {
    pub fn new(regressor: ModelKind, subset: FeatureSubset) -> Self {
        EvalConfig {
            regressor,
            grid: None,
            subset,
            cv_folds: DEFAULT_CV_FOLDS,
            cv_criterion: CvCriterion::Mse,
            seed: 0,
            metric_label: String::new(),
            pooling_label: String::new(),
        }
    }

    fn grid_for(&self, ds: &QoEDataset) -> Result<HyperGrid> {
        if self.regressor == ModelKind::Identity {
            if self.subset.features() != [Feature::Vqa] {
                return Err(Error::InvalidParameter(format!(
                    "the identity pathway uses the quality feature alone, got {}",
                    self.subset
                )));
            }
            return Ok(HyperGrid::single(Hyperparams::Identity {
                higher_is_better: ds.higher_is_better,
            }));
        }
        let grid = self.grid.clone().unwrap_or_else(|| HyperGrid::default_for(self.regressor));
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(bad) = grid.candidates.iter().find(|h| h.kind() != self.regressor) {
            return Err(Error::InvalidParameter(format!(
                "grid candidate for {} in a {} search",
                bad.kind(),
                self.regressor
            )));
        }
        Ok(grid)
    }
}

/// Selects hyperparameters by cross-validation on `train_ds`, then fits once.
pub fn fit_model(train_ds: &QoEDataset, cfg: &EvalConfig, cv_seed: u64, train_seed: u64) -> Result<TrainedModel> {
    let x = train_ds.matrix(&cfg.subset);
    let y = train_ds.mos();
    let grid = cfg.grid_for(train_ds)?;
    let hp = if grid.len() == 1 {
        grid.candidates[0]
    } else {
        let k = cfg.cv_folds.min(x.rows());
        grid_search_cv(&x, &y, &cfg.subset, &grid, k, cv_seed, cfg.cv_criterion)?.best
    };
    train(&x, &y, &hp, &cfg.subset, train_seed)
}

fn rows_of(ds: &QoEDataset, contents: &[String]) -> Vec<usize> {
    (0..ds.len())
        .filter(|&i| contents.binary_search(&ds.samples[i].content_id).is_ok())
        .collect()
}

fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    (rng::derive(seed, &[trial as u64, 1]), rng::derive(seed, &[trial as u64, 2]))
}

/// The model an Experiment-1 trial trains. Only the split's training
/// contents are ever read from `ds`.
pub fn train_for_split(ds: &QoEDataset, split: &Split, cfg: &EvalConfig, trial: usize) -> Result<TrainedModel> {
    let train_ds = ds.subset(&rows_of(ds, &split.train));
    let (cv_seed, train_seed) = trial_seeds(cfg.seed, trial);
    fit_model(&train_ds, cfg, cv_seed, train_seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub srocc: Option<f64>,
    pub lcc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.srocc.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub metric: String,
    pub pooling: String,
    pub regressor: String,
    pub features: String,
    /// Row of the feature-subset ablation table, when the subset is one of them.
    pub subset_index: Option<usize>,
    pub memory: MemoryVariant,
    pub seed: u64,
    pub cv_folds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledScore {
    pub n: usize,
    pub srocc: Option<f64>,
    pub lcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: Feature,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub config: ConfigEcho,
    pub n_trials: usize,
    pub n_failed: usize,
    pub median_srocc: Option<f64>,
    pub median_lcc: Option<f64>,
    /// Median SROCC/LCC of the pooled quality score alone on the same trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub br_median_srocc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub br_median_lcc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled: Option<PooledScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<Vec<FeatureWeight>>,
    pub trials: Vec<TrialRecord>,
}

impl EvalReport {
    fn assemble(experiment: &str, config: ConfigEcho, trials: Vec<TrialRecord>) -> Self {
        let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.succeeded()).collect();
        let sroccs: Vec<f64> = ok.iter().filter_map(|t| t.srocc).collect();
        let lccs: Vec<f64> = ok.iter().filter_map(|t| t.lcc).collect();
        EvalReport {
            experiment: experiment.to_string(),
            config,
            n_trials: trials.len(),
            n_failed: trials.len() - ok.len(),
            median_srocc: median(&sroccs),
            median_lcc: median(&lccs),
            br_median_srocc: None,
            br_median_lcc: None,
            pooled: None,
            importances: None,
            trials,
        }
    }

    /// Per-trial SROCC with failed trials as NaN, in trial order.
    pub fn trial_sroccs(&self) -> Vec<f64> {
        self.trials
            .iter()
            .map(|t| if t.succeeded() { t.srocc.unwrap_or(f64::NAN) } else { f64::NAN })
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn trials_csv_string(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut s = String::from("trial,label,n_train,n_test,srocc,lcc,error\n");
        for t in &self.trials {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.index,
                t.label.as_deref().unwrap_or(""),
                t.n_train,
                t.n_test,
                fmt(t.srocc),
                fmt(t.lcc),
                t.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        s
    }
}

fn echo(cfg: &EvalConfig, ds: &QoEDataset, train_fraction: Option<f64>) -> ConfigEcho {
    ConfigEcho {
        metric: cfg.metric_label.clone(),
        pooling: cfg.pooling_label.clone(),
        regressor: cfg.regressor.name().to_string(),
        features: cfg.subset.to_string(),
        subset_index: cfg.subset.table_index(),
        memory: ds.memory,
        seed: cfg.seed,
        cv_folds: cfg.cv_folds,
        train_fraction,
    }
}

fn score(pred: &[f64], mos: &[f64]) -> (Option<f64>, Option<f64>) {
    (srocc(pred, mos), lcc_after_logistic(pred, mos))
}

fn mean_importances(cfg: &EvalConfig, models: &[Option<TrainedModel>]) -> Option<Vec<FeatureWeight>> {
    if !cfg.regressor.is_tree_ensemble() {
        return None;
    }
    let vecs: Vec<Vec<f64>> = models
        .iter()
        .flatten()
        .filter_map(|m| feature_importances(m).ok())
        .collect();
    if vecs.is_empty() {
        return None;
    }
    let d = cfg.subset.len();
    let mut acc = vec![0.0; d];
    for v in &vecs {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    let total: f64 = acc.iter().sum();
    Some(
        cfg.subset
            .features()
            .iter()
            .zip(acc)
            .map(|(&feature, w)| FeatureWeight {
                feature,
                weight: if total > 0.0 { w / total } else { 0.0 },
            })
            .collect(),
    )
}

fn pooled_quality(ds: &QoEDataset, rows: &[usize]) -> Vec<f64> {
    let sign = if ds.higher_is_better { 1.0 } else { -1.0 };
    rows.iter().map(|&i| sign * ds.samples[i].features.vqa).collect()
}

/// Per-trial correlations of the pooled quality score itself (no learning).
pub fn before_regression(ds: &QoEDataset, splits: &SplitMatrix) -> Vec<(Option<f64>, Option<f64>)> {
    splits
        .trials
        .par_iter()
        .map(|s| {
            let rows = rows_of(ds, &s.test);
            let mos: Vec<f64> = rows.iter().map(|&i| ds.samples[i].mos).collect();
            score(&pooled_quality(ds, &rows), &mos)
        })
        .collect()
}

/// Content-independence trials over pre-generated splits.
pub fn run_experiment1(ds: &QoEDataset, splits: &SplitMatrix, cfg: &EvalConfig) -> Result<EvalReport> {
    if ds.contents().len() < 2 {
        return Err(Error::DegenerateSplit("need at least two contents".into()));
    }
    cfg.grid_for(ds)?;
    let outcomes: Vec<(TrialRecord, Option<TrainedModel>)> = splits
        .trials
        .par_iter()
        .enumerate()
        .map(|(t, split)| {
            let train_rows = rows_of(ds, &split.train);
            let test_rows = rows_of(ds, &split.test);
            let mut rec = TrialRecord {
                index: t,
                label: None,
                n_train: train_rows.len(),
                n_test: test_rows.len(),
                srocc: None,
                lcc: None,
                error: None,
            };
            let result = train_for_split(ds, split, cfg, t).and_then(|m| {
                let test = ds.subset(&test_rows);
                let pred = predict(&m, &test.matrix(&cfg.subset))?;
                Ok((m, pred, test.mos()))
            });
            match result {
                Ok((m, pred, mos)) => {
                    (rec.srocc, rec.lcc) = score(&pred, &mos);
                    (rec, Some(m))
                }
                Err(e) => {
                    rec.error = Some(e.to_string());
                    (rec, None)
                }
            }
        })
        .collect();
    let (records, models): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let mut report = EvalReport::assemble("1", echo(cfg, ds, Some(splits.train_fraction)), records);
    report.importances = mean_importances(cfg, &models);
    let br = before_regression(ds, splits);
    report.br_median_srocc = median(&br.iter().filter_map(|b| b.0).collect::<Vec<_>>());
    report.br_median_lcc = median(&br.iter().filter_map(|b| b.1).collect::<Vec<_>>());
    Ok(report)
}

/// Leave-one-pattern-out folds as (held-out pattern, train rows, test rows).
pub fn pattern_folds(ds: &QoEDataset) -> Result<Vec<(String, Vec<usize>, Vec<usize>)>> {
    let patterns = ds.patterns();
    if patterns.len() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "leave-one-pattern-out needs at least two patterns, found {}",
            patterns.len()
        )));
    }
    Ok(patterns
        .into_iter()
        .map(|p| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| ds.samples[i].pattern_id == p);
            (p, train, test)
        })
        .collect())
}

/// Pattern-independence: each playout pattern held out in turn.
pub fn run_experiment2(ds: &QoEDataset, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.grid_for(ds)?;
    let folds = pattern_folds(ds)?;
    let outcomes: Vec<(TrialRecord, Option<TrainedModel>, Vec<(f64, f64)>)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, (pattern, train_rows, test_rows))| {
            let mut rec = TrialRecord {
                index: f,
                label: Some(pattern.clone()),
                n_train: train_rows.len(),
                n_test: test_rows.len(),
                srocc: None,
                lcc: None,
                error: None,
            };
            let (cv_seed, train_seed) = trial_seeds(cfg.seed, f);
            let result = fit_model(&ds.subset(train_rows), cfg, cv_seed, train_seed).and_then(|m| {
                let test = ds.subset(test_rows);
                let pred = predict(&m, &test.matrix(&cfg.subset))?;
                Ok((m, pred, test.mos()))
            });
            match result {
                Ok((m, pred, mos)) => {
                    (rec.srocc, rec.lcc) = score(&pred, &mos);
                    let pairs = pred.into_iter().zip(mos).collect();
                    (rec, Some(m), pairs)
                }
                Err(e) => {
                    rec.error = Some(e.to_string());
                    (rec, None, Vec::new())
                }
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut models = Vec::new();
    let (mut pred, mut mos) = (Vec::new(), Vec::new());
    for (r, m, pairs) in outcomes {
        records.push(r);
        models.push(m);
        for (p, y) in pairs {
            pred.push(p);
            mos.push(y);
        }
    }
    let mut report = EvalReport::assemble("2", echo(cfg, ds, None), records);
    let (s, l) = score(&pred, &mos);
    report.pooled = Some(PooledScore { n: pred.len(), srocc: s, lcc: l });
    report.importances = mean_importances(cfg, &models);
    Ok(report)
}

/// The subset actually usable when transferring between two datasets.
/// Without bitrate variation on either side only the quality, stall-based
/// memory and stall-count features remain meaningful.
pub fn cross_dataset_subset(train_ds: &QoEDataset, test_ds: &QoEDataset, wanted: &FeatureSubset) -> Result<FeatureSubset> {
    if train_ds.bitrate_variation && test_ds.bitrate_variation {
        if train_ds.memory != test_ds.memory {
            return Err(Error::FeatureSubsetMismatch(format!(
                "memory feature differs: {:?} vs {:?}",
                train_ds.memory, test_ds.memory
            )));
        }
        return Ok(wanted.clone());
    }
    if train_ds.memory != MemoryVariant::Stall || test_ds.memory != MemoryVariant::Stall {
        return Err(Error::FeatureSubsetMismatch(
            "a dataset without bitrate variation needs both sides extracted with the stall-based memory feature".into(),
        ));
    }
    FeatureSubset::new(&[Feature::Vqa, Feature::M, Feature::R2])
}

/// Train on one dataset, test on the other; repeated with fresh training seeds.
pub fn run_cross_dataset(train_ds: &QoEDataset, test_ds: &QoEDataset, cfg: &EvalConfig, repetitions: usize) -> Result<EvalReport> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter("need at least one repetition".into()));
    }
    let subset = cross_dataset_subset(train_ds, test_ds, &cfg.subset)?;
    let cfg = EvalConfig {
        subset,
        ..cfg.clone()
    };
    if train_ds.higher_is_better != test_ds.higher_is_better {
        return Err(Error::FeatureSubsetMismatch("quality feature polarity differs between datasets".into()));
    }
    cfg.grid_for(train_ds)?;
    let x_test = test_ds.matrix(&cfg.subset);
    let mos = test_ds.mos();
    let outcomes: Vec<(TrialRecord, Option<TrainedModel>)> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rec = TrialRecord {
                index: r,
                label: None,
                n_train: train_ds.len(),
                n_test: test_ds.len(),
                srocc: None,
                lcc: None,
                error: None,
            };
            // CV folds stay fixed; only the training randomness varies.
            let result = fit_model(train_ds, &cfg, cfg.seed, rng::derive(cfg.seed, &[r as u64]))
                .and_then(|m| predict(&m, &x_test).map(|p| (m, p)));
            match result {
                Ok((m, pred)) => {
                    (rec.srocc, rec.lcc) = score(&pred, &mos);
                    (rec, Some(m))
                }
                Err(e) => {
                    rec.error = Some(e.to_string());
                    (rec, None)
                }
            }
        })
        .collect();
    let (records, models): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let mut report = EvalReport::assemble("cross", echo(&cfg, train_ds, None), records);
    report.importances = mean_importances(&cfg, &models);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub train_fraction: f64,
    pub n_train_contents: usize,
    pub median_srocc: Option<f64>,
    pub median_lcc: Option<f64>,
    pub n_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ConfigEcho,
    pub trials_per_point: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Whitespace-separated columns, one line per fraction.
    pub fn to_dat_string(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x}"));
        let mut s = String::from("# train_fraction n_train_contents median_srocc median_lcc\n");
        for p in &self.points {
            s.push_str(&format!(
                "{} {} {} {}\n",
                p.train_fraction,
                p.n_train_contents,
                fmt(p.median_srocc),
                fmt(p.median_lcc)
            ));
        }
        s
    }
}

pub fn train_fraction_sweep(ds: &QoEDataset, fractions: &[f64], trials: usize, cfg: &EvalConfig) -> Result<SweepReport> {
    let contents = ds.contents();
    let mut points = Vec::with_capacity(fractions.len());
    for (k, &f) in fractions.iter().enumerate() {
        let n_train = train_count(contents.len(), f)?;
        let splits = gen_content_splits(&contents, f, trials, rng::derive(cfg.seed, &[k as u64]))?;
        let r = run_experiment1(ds, &splits, cfg)?;
        points.push(SweepPoint {
            train_fraction: f,
            n_train_contents: n_train,
            median_srocc: r.median_srocc,
            median_lcc: r.median_lcc,
            n_failed: r.n_failed,
        });
    }
    Ok(SweepReport {
        config: echo(cfg, ds, None),
        trials_per_point: trials,
        points,
    })
}
