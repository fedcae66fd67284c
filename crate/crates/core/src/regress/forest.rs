//! Random forests and extremely randomized trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Splitter, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn random_forest() -> Self {
        ForestParams {
            trees: 100,
            max_features: MaxFeatures::All,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }

    pub fn extra_trees() -> Self {
        ForestParams {
            bootstrap: false,
            ..Self::random_forest()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestVariant {
    Rf,
    Et,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Per-feature impurity decrease, each tree normalized then averaged.
    pub importances: Vec<f64>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else if !v.is_empty() {
        // no split anywhere: nothing distinguishes the features
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], p: &ForestParams, variant: ForestVariant, seed: u64) -> Result<Forest> {
    if p.trees == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree".into()));
    }
    if p.min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be >= 1".into()));
    }
    let n = x.rows();
    let tp = TreeParams {
        max_features: p.max_features.resolve(x.cols()),
        min_leaf: p.min_leaf,
        max_depth: p.max_depth,
        splitter: match variant {
            ForestVariant::Rf => Splitter::Best,
            ForestVariant::Et => Splitter::Random,
        },
    };
    let grown: Vec<(Tree, Vec<f64>)> = (0..p.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, &[t as u64]);
            let rows: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let (tree, mut imp) = grow_tree(x, y, &rows, tp, &mut rng);
            if imp.iter().sum::<f64>() > 0.0 {
                normalize(&mut imp);
            }
            (tree, imp)
        })
        .collect();
    let mut importances = vec![0.0; x.cols()];
    for (_, imp) in &grown {
        importances.iter_mut().zip(imp).for_each(|(a, b)| *a += b);
    }
    normalize(&mut importances);
    Ok(Forest {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        importances,
    })
}
