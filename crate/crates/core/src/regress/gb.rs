//! Least-squares gradient boosting of regression trees.

use serde::{Deserialize, Serialize};

use super::forest::normalize;
use super::tree::{grow_tree, Splitter, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbParams {
    pub estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub importances: Vec<f64>,
}

impl Boosted {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict_row(row))
    }
}

/// Fits the model, also returning the training MSE after each round
/// (index 0 is the constant initial model).
pub fn fit_gb_traced(x: &Matrix, y: &[f64], p: &GbParams, seed: u64) -> Result<(Boosted, Vec<f64>)> {
    if p.estimators == 0 {
        return Err(Error::InvalidParameter("boosting needs at least one estimator".into()));
    }
    if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("learning rate must be in (0, 1], got {}", p.learning_rate)));
    }
    let n = y.len();
    if n == 0 || x.rows() != n {
        return Err(Error::ShapeMismatch(format!("{} rows but {} targets", x.rows(), n)));
    }
    let init = y.iter().sum::<f64>() / n as f64;
    let mut f = vec![init; n];
    let mse = |f: &[f64]| f.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    let mut trace = vec![mse(&f)];
    let tp = TreeParams {
        max_features: x.cols(),
        min_leaf: 1,
        max_depth: Some(p.max_depth),
        splitter: Splitter::Best,
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(p.estimators);
    let mut importances = vec![0.0; x.cols()];
    for k in 0..p.estimators {
        let residual: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let mut rng = rng::stream(seed, &[k as u64]);
        let (tree, imp) = grow_tree(x, &residual, &rows, tp, &mut rng);
        importances.iter_mut().zip(&imp).for_each(|(a, b)| *a += b);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += p.learning_rate * tree.predict_row(x.row(i));
        }
        trace.push(mse(&f));
        trees.push(tree);
    }
    normalize(&mut importances);
    Ok((
        Boosted {
            init,
            learning_rate: p.learning_rate,
            trees,
            importances,
        },
        trace,
    ))
}

pub fn fit_gb(x: &Matrix, y: &[f64], p: &GbParams, seed: u64) -> Result<Boosted> {
    fit_gb_traced(x, y, p, seed).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_predicts_mean() {
        let x = Matrix::column_vector(&[1.0, 2.0, 3.0]);
        let p = GbParams { estimators: 1, learning_rate: 0.1, max_depth: 0 };
        let m = fit_gb(&x, &[1.0, 2.0, 6.0], &p, 0).unwrap();
        assert_eq!(m.predict_row(&[2.5]), 3.0);
    }

    #[test]
    fn two_stumps_by_hand() {
        // x = 0,1,2,3; y = 1,3,2,8; lr = 0.5
        // f0 = 3.5, r = (-2.5,-0.5,-1.5,4.5); best stump x<=2.5: left -1.5, right 4.5
        // f1 = (2.75,2.75,2.75,5.75), r = (-1.75,0.25,-0.75,2.25)
        // second stump: x<=0.5 gives sse 0+4.6667, x<=2.5 gives 2.0+0, x<=1.5 gives 2.0+4.5
        //   -> x<=2.5 with left mean -0.75, right 2.25
        // f2 = (2.375,2.375,2.375,6.875)
        let x = Matrix::column_vector(&[0.0, 1.0, 2.0, 3.0]);
        let y = [1.0, 3.0, 2.0, 8.0];
        let p = GbParams { estimators: 2, learning_rate: 0.5, max_depth: 1 };
        let m = fit_gb(&x, &y, &p, 9).unwrap();
        let want = [2.375, 2.375, 2.375, 6.875];
        for (i, w) in want.iter().enumerate() {
            assert!((m.predict_row(x.row(i)) - w).abs() < 1e-9);
        }
    }

    #[test]
    fn training_error_never_increases() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 5.0).collect();
        let x = Matrix::column_vector(&xs);
        let y: Vec<f64> = xs.iter().map(|v| v.sin() * 3.0 + 0.1 * v).collect();
        let (_, trace) = fit_gb_traced(&x, &y, &GbParams { estimators: 40, learning_rate: 0.3, max_depth: 2 }, 1).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
