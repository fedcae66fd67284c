//! K-fold cross-validated grid search.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, MaxFeatures};
use super::gb::GbParams;
use super::svr::SvrParams;
use super::{predict, train, Hyperparams, ModelKind};
use crate::error::{Error, Result};
use crate::features::FeatureSubset;
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvCriterion {
    #[default]
    Mse,
    Mae,
}

impl CvCriterion {
    fn loss(self, pred: &[f64], truth: &[f64]) -> f64 {
        let n = truth.len() as f64;
        match self {
            CvCriterion::Mse => pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n,
            CvCriterion::Mae => pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n,
        }
    }
}

impl std::str::FromStr for CvCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(CvCriterion::Mse),
            "mae" => Ok(CvCriterion::Mae),
            other => Err(Error::InvalidParameter(format!("unknown CV criterion {other:?}"))),
        }
    }
}

/// Ordered candidate list for one regressor kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub candidates: Vec<Hyperparams>,
}

impl HyperGrid {
    pub fn new(candidates: Vec<Hyperparams>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(HyperGrid { candidates })
    }

    pub fn single(hp: Hyperparams) -> Self {
        HyperGrid { candidates: vec![hp] }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// The stock grid for `kind`.
    pub fn default_for(kind: ModelKind) -> Self {
        let lambdas = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
        let candidates = match kind {
            ModelKind::Ridge => lambdas.iter().map(|&lambda| Hyperparams::Ridge { lambda }).collect(),
            ModelKind::Lasso => lambdas.iter().map(|&lambda| Hyperparams::Lasso { lambda }).collect(),
            ModelKind::Svr => {
                let mut v = Vec::new();
                for c in [1.0, 10.0, 100.0] {
                    for gamma in [0.01, 0.1, 1.0] {
                        for epsilon in [0.1, 1.0] {
                            v.push(Hyperparams::Svr(SvrParams { c, gamma, epsilon }));
                        }
                    }
                }
                v
            }
            ModelKind::Rf | ModelKind::Et => {
                let base = if kind == ModelKind::Rf {
                    ForestParams::random_forest()
                } else {
                    ForestParams::extra_trees()
                };
                let mut v = Vec::new();
                for trees in [100, 500] {
                    for max_features in [MaxFeatures::All, MaxFeatures::Sqrt] {
                        for min_leaf in [1, 3] {
                            let p = ForestParams {
                                trees,
                                max_features,
                                min_leaf,
                                ..base
                            };
                            v.push(if kind == ModelKind::Rf {
                                Hyperparams::Rf(p)
                            } else {
                                Hyperparams::Et(p)
                            });
                        }
                    }
                }
                v
            }
            ModelKind::Gb => {
                let mut v = Vec::new();
                for learning_rate in [0.05, 0.1] {
                    for estimators in [100, 300] {
                        for max_depth in [2, 3] {
                            v.push(Hyperparams::Gb(GbParams {
                                estimators,
                                learning_rate,
                                max_depth,
                            }));
                        }
                    }
                }
                v
            }
            ModelKind::Identity => vec![Hyperparams::Identity { higher_is_better: true }],
        };
        HyperGrid { candidates }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best: Hyperparams,
    pub best_index: usize,
    /// Mean validation loss per candidate; infinite where training failed.
    pub scores: Vec<f64>,
}

/// Assigns each row to a fold: rows are shuffled, then dealt round-robin.
pub fn fold_assignment(rows: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng::stream(seed, &[u64::MAX]));
    let mut fold = vec![0; rows];
    for (pos, &r) in order.iter().enumerate() {
        fold[r] = pos % k;
    }
    fold
}

pub fn grid_search_cv(
    x: &Matrix,
    y: &[f64],
    mask: &FeatureSubset,
    grid: &HyperGrid,
    k: usize,
    seed: u64,
    criterion: CvCriterion,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if k > x.rows() {
        return Err(Error::TooManyFolds { k, rows: x.rows() });
    }
    if grid.len() == 1 {
        return Ok(CvResult {
            best: grid.candidates[0],
            best_index: 0,
            scores: vec![f64::NAN],
        });
    }
    let fold = fold_assignment(x.rows(), k, seed);
    let splits: Vec<(Matrix, Vec<f64>, Matrix, Vec<f64>)> = (0..k)
        .map(|f| {
            let tr: Vec<usize> = (0..x.rows()).filter(|&i| fold[i] != f).collect();
            let va: Vec<usize> = (0..x.rows()).filter(|&i| fold[i] == f).collect();
            (
                x.select_rows(&tr),
                tr.iter().map(|&i| y[i]).collect(),
                x.select_rows(&va),
                va.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let losses: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (xt, yt, xv, yv) = &splits[f];
            let s = rng::derive(seed, &[f as u64, g as u64]);
            let m = train(xt, yt, &grid.candidates[g], mask, s)?;
            Ok(criterion.loss(&predict(&m, xv)?, yv))
        })
        .collect();
    let mut scores = vec![0.0; grid.len()];
    let mut first_err = None;
    for (&(g, _), l) in jobs.iter().zip(losses) {
        match l {
            Ok(v) if v.is_finite() => scores[g] += v / k as f64,
            Ok(_) => scores[g] = f64::INFINITY,
            Err(e) => {
                log::debug!("candidate {g} failed: {e}");
                scores[g] = f64::INFINITY;
                first_err.get_or_insert(e);
            }
        }
    }
    let mut best_index = 0;
    for (g, &s) in scores.iter().enumerate() {
        if s < scores[best_index] {
            best_index = g;
        }
    }
    if !scores[best_index].is_finite() {
        return Err(first_err.unwrap_or(Error::NoConvergence {
            solver: "cross-validation",
            iterations: 0,
        }));
    }
    Ok(CvResult {
        best: grid.candidates[best_index],
        best_index,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Feature;

    fn linear_data() -> (Matrix, Vec<f64>) {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 3.0).collect();
        let y = xs.iter().enumerate().map(|(i, x)| 4.0 * x + 0.01 * ((i * 7) % 5) as f64).collect();
        (Matrix::column_vector(&xs), y)
    }

    fn mask() -> FeatureSubset {
        FeatureSubset::new(&[Feature::Vqa]).unwrap()
    }

    #[test]
    fn picks_weak_regularization_on_linear_data() {
        let (x, y) = linear_data();
        let grid = HyperGrid::new(vec![Hyperparams::Ridge { lambda: 1e6 }, Hyperparams::Ridge { lambda: 1e-6 }]).unwrap();
        let r = grid_search_cv(&x, &y, &mask(), &grid, 10, 0, CvCriterion::Mse).unwrap();
        assert_eq!(r.best, Hyperparams::Ridge { lambda: 1e-6 });
        assert!(r.scores[1] < r.scores[0]);
    }

    #[test]
    fn ties_go_to_first_candidate() {
        let (x, y) = linear_data();
        let hp = Hyperparams::Ridge { lambda: 1.0 };
        let grid = HyperGrid::new(vec![hp, hp, Hyperparams::Ridge { lambda: 1e5 }]).unwrap();
        assert_eq!(grid_search_cv(&x, &y, &mask(), &grid, 5, 3, CvCriterion::Mse).unwrap().best_index, 0);
    }

    #[test]
    fn fold_limits() {
        let (x, y) = linear_data();
        let grid = HyperGrid::default_for(ModelKind::Ridge);
        assert!(matches!(
            grid_search_cv(&x, &y, &mask(), &grid, 31, 0, CvCriterion::Mse),
            Err(Error::TooManyFolds { k: 31, rows: 30 })
        ));
        assert!(grid_search_cv(&x, &y, &mask(), &grid, 1, 0, CvCriterion::Mse).is_err());
        assert!(HyperGrid::new(vec![]).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(23, 10, 5);
        for k in 0..10 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 2 || c == 3);
        }
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(HyperGrid::default_for(ModelKind::Ridge).len(), 7);
        assert_eq!(HyperGrid::default_for(ModelKind::Svr).len(), 18);
        assert_eq!(HyperGrid::default_for(ModelKind::Rf).len(), 8);
        assert_eq!(HyperGrid::default_for(ModelKind::Gb).len(), 8);
    }
}
