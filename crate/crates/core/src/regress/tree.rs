//! CART regression trees on variance reduction.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitter {
    /// Exhaustive search over midpoints of consecutive distinct values.
    Best,
    /// One uniformly drawn threshold per candidate feature.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeParams {
    pub max_features: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub splitter: Splitter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

fn sse(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
    let s = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum::<f64>();
    (mean, s)
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (mean, node_sse) = sse(self.y, rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        let p = self.params;
        if rows.len() < 2 * p.min_leaf.max(1) || p.max_depth.is_some_and(|d| depth >= d) || node_sse <= 0.0 {
            return id;
        }
        let Some(best) = self.find_split(rows, node_sse, rng) else {
            return id;
        };
        self.importance[best.feature] += best.gain;
        // stable partition keeps the row order (and thus float sums) reproducible
        let (mut l, mut r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let left = self.grow(&mut l, depth + 1, rng);
        let right = self.grow(&mut r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn find_split(&self, rows: &[usize], node_sse: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let d = self.x.cols();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        for &f in &order {
            if evaluated >= self.params.max_features {
                break;
            }
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                let v = self.x.get(r, f);
                (lo.min(v), hi.max(v))
            });
            if lo >= hi {
                // constant features do not count towards the budget
                continue;
            }
            evaluated += 1;
            let cand = match self.params.splitter {
                Splitter::Best => self.best_threshold(rows, f, node_sse),
                Splitter::Random => {
                    let t = rng.random_range(lo..hi);
                    self.threshold_gain(rows, f, t, node_sse)
                }
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * node_sse.max(f64::MIN_POSITIVE))
    }

    fn threshold_gain(&self, rows: &[usize], f: usize, t: f64, node_sse: f64) -> Option<Candidate> {
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x.get(i, f) <= t);
        if l.len() < self.params.min_leaf.max(1) || r.len() < self.params.min_leaf.max(1) {
            return None;
        }
        let gain = node_sse - sse(self.y, &l).1 - sse(self.y, &r).1;
        Some(Candidate { feature: f, threshold: t, gain })
    }

    fn best_threshold(&self, rows: &[usize], f: usize, node_sse: f64) -> Option<Candidate> {
        let mut sorted: Vec<(f64, f64)> = rows.iter().map(|&r| (self.x.get(r, f), self.y[r])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let total: f64 = sorted.iter().map(|p| p.1).sum();
        let total_sq: f64 = sorted.iter().map(|p| p.1 * p.1).sum();
        let min_leaf = self.params.min_leaf.max(1);
        let (mut s, mut sq) = (0.0, 0.0);
        let mut best: Option<(usize, f64)> = None;
        for k in 1..n {
            s += sorted[k - 1].1;
            sq += sorted[k - 1].1 * sorted[k - 1].1;
            if sorted[k - 1].0 == sorted[k].0 || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let left = sq - s * s / nl;
            let right = (total_sq - sq) - (total - s) * (total - s) / nr;
            let split_sse = left.max(0.0) + right.max(0.0);
            if best.is_none_or(|(_, b)| split_sse < b) {
                best = Some((k, split_sse));
            }
        }
        let (k, _) = best?;
        let mut threshold = 0.5 * (sorted[k - 1].0 + sorted[k].0);
        if threshold >= sorted[k].0 {
            threshold = sorted[k - 1].0;
        }
        // exact two-pass gain, so importances do not inherit cancellation error
        self.threshold_gain(rows, f, threshold, node_sse)
    }
}

/// Grows a tree on the given rows (duplicates allowed, as in a bootstrap
/// sample). Returns the tree and the unnormalized variance decrease credited
/// to each feature.
pub fn grow_tree(x: &Matrix, y: &[f64], rows: &[usize], params: TreeParams, rng: &mut ChaCha8Rng) -> (Tree, Vec<f64>) {
    let mut b = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
        importance: vec![0.0; x.cols()],
    };
    let mut rows = rows.to_vec();
    b.grow(&mut rows, 0, rng);
    (Tree { nodes: b.nodes }, b.importance)
}
