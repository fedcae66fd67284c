//! Pre-generated content-disjoint train/test splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMatrix {
    pub seed: u64,
    pub train_fraction: f64,
    pub trials: Vec<Split>,
}

/// Number of training contents: nearest integer, at least one on each side.
pub fn train_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::DegenerateSplit(format!("train fraction {fraction} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::DegenerateSplit(format!("{n} contents cannot be split")));
    }
    Ok(((fraction * n as f64).round() as usize).clamp(1, n - 1))
}

pub fn gen_content_splits(contents: &[String], train_fraction: f64, n_trials: usize, seed: u64) -> Result<SplitMatrix> {
    let k = train_count(contents.len(), train_fraction)?;
    let mut sorted = contents.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != contents.len() {
        return Err(Error::DegenerateSplit("duplicate content ids".into()));
    }
    let trials = (0..n_trials)
        .map(|t| {
            let mut order = sorted.clone();
            order.shuffle(&mut rng::stream(seed, &[t as u64]));
            let mut train = order[..k].to_vec();
            let mut test = order[k..].to_vec();
            train.sort();
            test.sort();
            Split { train, test }
        })
        .collect();
    Ok(SplitMatrix {
        seed,
        train_fraction,
        trials,
    })
}
