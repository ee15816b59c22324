use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rows reaching a node and the features it may split on.
pub struct SplitContext<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub rows: &'a [usize],
    /// Sorted ascending.
    pub candidates: &'a [usize],
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `s_L²/n_L + s_R²/n_R`; larger means lower child variance.
    pub score: f64,
}

/// Chooses a `(feature, threshold)` for one node.
pub trait SplitStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether trees resample rows with replacement unless told otherwise.
    fn default_bootstrap(&self) -> bool;

    fn find_split(&self, ctx: &SplitContext<'_>, rng: &mut ChaCha8Rng) -> Option<Split>;
}

fn parent_score(ctx: &SplitContext<'_>) -> f64 {
    let s: f64 = ctx.rows.iter().map(|&r| ctx.y[r]).sum();
    s * s / ctx.rows.len() as f64
}

fn improves(score: f64, parent: f64) -> bool {
    score > parent + 1e-12 * parent.abs().max(1e-300)
}

/// Exhaustive search over midpoints of consecutive distinct values.
pub struct BestSplit;

impl SplitStrategy for BestSplit {
    fn name(&self) -> &'static str {
        "random_forest"
    }

    fn default_bootstrap(&self) -> bool {
        true
    }

    fn find_split(&self, ctx: &SplitContext<'_>, _rng: &mut ChaCha8Rng) -> Option<Split> {
        let n = ctx.rows.len();
        let total: f64 = ctx.rows.iter().map(|&r| ctx.y[r]).sum();
        let parent = parent_score(ctx);
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for &f in ctx.candidates {
            order.clear();
            order.extend_from_slice(ctx.rows);
            order.sort_by(|&a, &b| ctx.x[a][f].total_cmp(&ctx.x[b][f]).then(a.cmp(&b)));
            let mut s_left = 0.0;
            for i in 1..n {
                s_left += ctx.y[order[i - 1]];
                let (lo, hi) = (ctx.x[order[i - 1]][f], ctx.x[order[i]][f]);
                if lo == hi || i < ctx.min_samples_leaf || n - i < ctx.min_samples_leaf {
                    continue;
                }
                let s_right = total - s_left;
                let score = s_left * s_left / i as f64 + s_right * s_right / (n - i) as f64;
                if best.is_none_or(|b| score > b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best.filter(|b| improves(b.score, parent))
    }
}

/// One uniform threshold per candidate feature inside the node's range.
pub struct RandomThreshold;

impl SplitStrategy for RandomThreshold {
    fn name(&self) -> &'static str {
        "extra_trees"
    }

    fn default_bootstrap(&self) -> bool {
        false
    }

    fn find_split(&self, ctx: &SplitContext<'_>, rng: &mut ChaCha8Rng) -> Option<Split> {
        let parent = parent_score(ctx);
        let mut best: Option<Split> = None;
        for &f in ctx.candidates {
            let u: f64 = rng.random();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in ctx.rows {
                lo = lo.min(ctx.x[r][f]);
                hi = hi.max(ctx.x[r][f]);
            }
            if !(hi > lo) {
                continue;
            }
            let mut threshold = lo + u * (hi - lo);
            if threshold >= hi {
                threshold = lo;
            }
            let (mut n_l, mut s_l, mut s_r) = (0usize, 0.0, 0.0);
            for &r in ctx.rows {
                if ctx.x[r][f] <= threshold {
                    n_l += 1;
                    s_l += ctx.y[r];
                } else {
                    s_r += ctx.y[r];
                }
            }
            let n_r = ctx.rows.len() - n_l;
            if n_l < ctx.min_samples_leaf.max(1) || n_r < ctx.min_samples_leaf.max(1) {
                continue;
            }
            let score = s_l * s_l / n_l as f64 + s_r * s_r / n_r as f64;
            if best.is_none_or(|b| score > b.score) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
        best.filter(|b| improves(b.score, parent))
    }
}

/// Split strategies addressable by name.
pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Box<dyn SplitStrategy>>,
}

impl StrategyRegistry {
    pub fn with_builtin() -> Self {
        let mut r = StrategyRegistry {
            strategies: BTreeMap::new(),
        };
        r.register(Box::new(BestSplit));
        r.register(Box::new(RandomThreshold));
        r
    }

    pub fn register(&mut self, s: Box<dyn SplitStrategy>) {
        self.strategies.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SplitStrategy> {
        self.strategies
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "forest variant",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
