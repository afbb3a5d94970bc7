//! Greedy binary regression trees.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::Matrix;
use crate::{Result, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Total within-node sum-of-squares reduction.
    #[default]
    SquaredError,
    /// `n_L * n_R / n * (mean_L - mean_R)^2`.
    FriedmanMse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::SquaredError,
            min_samples_split: 2,
            max_depth: Some(20),
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        n: usize,
    },
}

/// Arena of nodes; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Unclamped leaf value for one row; `x[feature] < threshold` goes left.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { mean, .. } => return mean,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] < threshold { left } else { right },
            }
        }
    }

    /// Predictions for every row, clamped at zero.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i)).max(0.0)).collect())
    }
}

/// Gain of splitting a node into `left` / `right` target sets.
pub fn split_gain(criterion: Criterion, left: &[f64], right: &[f64]) -> f64 {
    let stats = |v: &[f64]| {
        let s: f64 = v.iter().sum();
        let q: f64 = v.iter().map(|x| x * x).sum();
        (v.len() as f64, s, q)
    };
    let (nl, sl, ql) = stats(left);
    let (nr, sr, qr) = stats(right);
    gain(criterion, (nl, sl, ql), (nr, sr, qr))
}

#[inline]
fn gain(criterion: Criterion, (nl, sl, ql): (f64, f64, f64), (nr, sr, qr): (f64, f64, f64)) -> f64 {
    match criterion {
        Criterion::SquaredError => {
            let n = nl + nr;
            let sse = |n: f64, s: f64, q: f64| q - s * s / n;
            sse(n, sl + sr, ql + qr) - sse(nl, sl, ql) - sse(nr, sr, qr)
        }
        Criterion::FriedmanMse => {
            let diff = sl / nl - sr / nr;
            nl * nr / (nl + nr) * diff * diff
        }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Fits a regression tree. Candidate thresholds are midpoints between
/// consecutive distinct feature values; the best gain wins, ties going to
/// the lower feature index and then the lower threshold. Gains within
/// 1e-12 of the parent sum of squares count as ties, since the same
/// partition reached through different features accumulates different
/// rounding. A node becomes a
/// leaf when it has fewer than `min_samples_split` samples, sits at
/// `max_depth`, or has no split with positive gain.
pub fn fit_cart(x: &Matrix, y: &[f64], params: &CartParams, seed: u64) -> Result<Tree> {
    if y.is_empty() || x.rows() == 0 {
        return Err(TreeError::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(TreeError::LengthMismatch {
            rows: x.rows(),
            targets: y.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..y.len()).collect();
    let mut nodes = vec![TreeNode::Leaf { mean: 0.0, n: 0 }];
    // (node slot, range start, range end, depth)
    let mut pending = vec![(0usize, 0usize, y.len(), 0usize)];
    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(y.len());

    while let Some((slot, lo, hi, depth)) = pending.pop() {
        let idx = &mut indices[lo..hi];
        let n = idx.len();
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        nodes[slot] = TreeNode::Leaf { mean, n };

        let constant = idx.iter().all(|&i| y[i] == y[idx[0]]);
        if n < params.min_samples_split.max(2) || params.max_depth.is_some_and(|d| depth >= d) || constant {
            continue;
        }

        let features: Vec<usize> = match params.max_features {
            Some(m) if m < x.cols() => {
                let mut f = sample(&mut rng, x.cols(), m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..x.cols()).collect(),
        };

        let sse_parent: f64 = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
        let min_gain = 1e-12 * sse_parent;
        let mut best: Option<Split> = None;
        for &f in &features {
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (x.get(i, f), y[i] - mean)));
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (total_s, total_q) = scratch.iter().fold((0.0, 0.0), |(s, q), &(_, v)| (s + v, q + v * v));
            let (mut sl, mut ql) = (0.0, 0.0);
            for i in 0..n - 1 {
                let (xi, vi) = scratch[i];
                sl += vi;
                ql += vi * vi;
                let xn = scratch[i + 1].0;
                if xi >= xn {
                    continue;
                }
                let nl = (i + 1) as f64;
                let g = gain(params.criterion, (nl, sl, ql), (n as f64 - nl, total_s - sl, total_q - ql));
                if g > min_gain && best.as_ref().is_none_or(|b| g > b.gain + min_gain) {
                    let mut threshold = 0.5 * (xi + xn);
                    if threshold <= xi {
                        threshold = xn;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain: g,
                    });
                }
            }
        }

        let Some(split) = best else { continue };
        // Stable partition: rows with x < threshold first.
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x.get(i, split.feature) < split.threshold);
        let n_left = left.len();
        idx[..n_left].copy_from_slice(&left);
        idx[n_left..].copy_from_slice(&right);

        let left_slot = nodes.len();
        nodes.push(TreeNode::Leaf { mean: 0.0, n: 0 });
        nodes.push(TreeNode::Leaf { mean: 0.0, n: 0 });
        nodes[slot] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: left_slot,
            right: left_slot + 1,
        };
        pending.push((left_slot + 1, lo + n_left, hi, depth + 1));
        pending.push((left_slot, lo, lo + n_left, depth + 1));
    }
    Ok(Tree {
        nodes,
        n_features: x.cols(),
    })
}
