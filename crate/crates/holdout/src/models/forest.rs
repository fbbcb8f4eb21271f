//! Bagged CART regression forest.
//!
//! Trees are grown on bootstrap resamples of the training rows with
//! variance-reduction splits over a random feature subset. All randomness
//! flows from `ForestConfig::seed` through per-tree derived streams, so the
//! fit is deterministic and independent of thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sub-stream label for tree construction.
const TREE_STREAM: u64 = 0x5452_4545; // "TREE"

/// Random forest hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    /// Number of bagged trees.
    pub n_trees: usize,
    /// Minimum number of training rows in a leaf.
    pub min_leaf_size: usize,
    /// Maximum tree depth; `None` grows until the leaf-size floor binds.
    pub max_depth: Option<usize>,
    /// Candidate features per split; 0 means `max(1, p / 3)`.
    pub features_per_split: usize,
    /// Seed for bootstrap and feature sampling.
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            min_leaf_size: 5,
            max_depth: None,
            features_per_split: 0,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn resolved_features_per_split(&self, p: usize) -> usize {
        if self.features_per_split == 0 {
            (p / 3).max(1)
        } else {
            self.features_per_split.min(p.max(1))
        }
    }
}

/// One node of a regression tree, stored in a flat arena.
#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Arena indices of the `< threshold` and `>= threshold` children.
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// A fitted forest; predictions average the member trees.
#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_features: usize,
    training_size: usize,
}

impl ForestModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, config: &ForestConfig) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if n != y.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if n == 0 {
            return Err(Error::TooFewRows {
                n_rows: 0,
                n_features: p,
                min_rows: 1,
            });
        }
        if config.n_trees == 0 || config.min_leaf_size == 0 {
            return Err(Error::InvalidArgument(
                "forest needs n_trees >= 1 and min_leaf_size >= 1".into(),
            ));
        }

        // Row-major copy so per-row access during growth is contiguous.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| x.row(i).iter().copied().collect())
            .collect();
        let targets: Vec<f64> = y.iter().copied().collect();
        let root = RngStream::new(config.seed);

        let trees: Vec<Tree> = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = root.derive_indexed(TREE_STREAM, t as u64);
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow_tree(&rows, &targets, sample, config, p, &mut rng)
            })
            .collect();

        Ok(Self {
            trees,
            n_features: p,
            training_size: n,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut row = vec![0.0; self.n_features];
        DVector::from_iterator(
            x.nrows(),
            (0..x.nrows()).map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = x[(i, j)];
                }
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(&row)).sum();
                sum / self.trees.len() as f64
            }),
        )
    }
}

/// Best split found for a node, by residual sum of squares after the split.
struct BestSplit {
    feature: usize,
    threshold: f64,
    rss: f64,
}

fn grow_tree(
    rows: &[Vec<f64>],
    targets: &[f64],
    sample: Vec<usize>,
    config: &ForestConfig,
    p: usize,
    rng: &mut RngStream,
) -> Tree {
    let mtry = config.resolved_features_per_split(p);
    let features: Vec<usize> = (0..p).collect();
    let mut nodes = Vec::new();
    // Explicit stack of (arena slot, member rows, depth) avoids recursion.
    let root_slot = push_placeholder(&mut nodes);
    let mut stack = vec![(root_slot, sample, 0usize)];

    while let Some((slot, members, depth)) = stack.pop() {
        let mean = members.iter().map(|&i| targets[i]).sum::<f64>() / members.len() as f64;
        let depth_capped = config.max_depth.is_some_and(|d| depth >= d);
        let too_small = members.len() < 2 * config.min_leaf_size;
        let split = if depth_capped || too_small || p == 0 {
            None
        } else {
            let mut candidates: Vec<usize> = features
                .choose_multiple(rng, mtry)
                .copied()
                .collect();
            // choose_multiple order depends on the rng; sort so the
            // lowest-feature tie-break is well defined.
            candidates.sort_unstable();
            best_split(rows, targets, &members, &candidates, config.min_leaf_size)
        };
        match split {
            None => nodes[slot] = Node::Leaf { value: mean },
            Some(best) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = members
                    .into_iter()
                    .partition(|&i| rows[i][best.feature] < best.threshold);
                let left = push_placeholder(&mut nodes);
                let right = push_placeholder(&mut nodes);
                nodes[slot] = Node::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right,
                };
                stack.push((left, left_rows, depth + 1));
                stack.push((right, right_rows, depth + 1));
            }
        }
    }
    Tree { nodes }
}

fn push_placeholder(nodes: &mut Vec<Node>) -> usize {
    nodes.push(Node::Leaf { value: f64::NAN });
    nodes.len() - 1
}

/// Exhaustive variance-reduction search over `candidates`.
///
/// Thresholds are midpoints between adjacent distinct feature values. Ties in
/// RSS break toward the lowest feature index, then the lowest threshold,
/// which both loops visit in increasing order.
fn best_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    members: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = members.len();
    let total_sum: f64 = members.iter().map(|&i| targets[i]).sum();
    let total_sq: f64 = members.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_rss = total_sq - total_sum * total_sum / n as f64;
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = members.to_vec();

    for &feature in candidates {
        order.sort_unstable_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]));
        // Prefix sums over the sorted order let each threshold be scored in
        // O(1): rss = total_sq - sum_l^2/n_l - sum_r^2/n_r.
        let mut left_sum = 0.0;
        for (k, &i) in order.iter().enumerate().take(n - 1) {
            left_sum += targets[i];
            let here = rows[i][feature];
            let next = rows[order[k + 1]][feature];
            if here == next {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let rss = total_sq
                - left_sum * left_sum / n_left as f64
                - right_sum * right_sum / n_right as f64;
            let threshold = 0.5 * (here + next);
            let better = match &best {
                None => true,
                Some(b) => rss < b.rss,
            };
            if better {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    rss,
                });
            }
        }
    }
    // A split must strictly reduce RSS; an all-constant response stays a leaf.
    best.filter(|b| b.rss < parent_rss)
}
