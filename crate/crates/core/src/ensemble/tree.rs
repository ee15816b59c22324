use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{Split, SplitContext, SplitStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeParams<'a> {
    pub strategy: &'a dyn SplitStrategy,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Grows a tree on `rows` (indices into `x`/`y`, repeats allowed).
    pub(crate) fn grow(
        x: &[Vec<f64>],
        y: &[f64],
        rows: Vec<usize>,
        params: &TreeParams<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        // explicit stack of (node slot, rows, depth) keeps deep trees off the call stack
        tree.nodes.push(Node::Leaf {
            value: 0.0,
            n_samples: 0,
        });
        let mut stack = vec![(0usize, rows, 0usize)];
        let n_features = x.first().map_or(0, Vec::len);
        while let Some((slot, rows, depth)) = stack.pop() {
            let n = rows.len();
            let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
            let leaf = Node::Leaf {
                value: mean,
                n_samples: n,
            };
            let constant = rows.iter().all(|&r| y[r] == y[rows[0]]);
            if constant
                || params.max_depth.is_some_and(|d| depth >= d)
                || n < params.min_samples_split
                || n < 2 * params.min_samples_leaf
            {
                tree.nodes[slot] = leaf;
                continue;
            }
            let mut candidates =
                index::sample(rng, n_features, params.max_features.min(n_features)).into_vec();
            candidates.sort_unstable();
            let ctx = SplitContext {
                x,
                y,
                rows: &rows,
                candidates: &candidates,
                min_samples_leaf: params.min_samples_leaf,
            };
            let Some(Split {
                feature, threshold, ..
            }) = params.strategy.find_split(&ctx, rng)
            else {
                tree.nodes[slot] = leaf;
                continue;
            };
            let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| x[r][feature] <= threshold);
            let left = tree.nodes.len();
            let right = left + 1;
            tree.nodes.push(Node::Leaf {
                value: 0.0,
                n_samples: 0,
            });
            tree.nodes.push(Node::Leaf {
                value: 0.0,
                n_samples: 0,
            });
            tree.nodes[slot] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            // right pushed first so the left subtree is grown first
            stack.push((right, r_rows, depth + 1));
            stack.push((left, l_rows, depth + 1));
        }
        tree
    }
}
