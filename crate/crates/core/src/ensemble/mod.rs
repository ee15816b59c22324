//! Bagged CART regression forests (Random Forest and Extra-Trees) and the
//! error metrics used to score them.

mod split;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use split::{BestSplit, RandomThreshold, Split, SplitContext, SplitStrategy, StrategyRegistry};
pub use tree::{Node, Tree};

use tree::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatureRule {
    All,
    Third,
    Sqrt,
}

/// Number of candidate features per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeatures {
    Count(usize),
    Rule(MaxFeatureRule),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Count(k) => k,
            MaxFeatures::Rule(MaxFeatureRule::All) => n_features,
            MaxFeatures::Rule(MaxFeatureRule::Third) => n_features.div_ceil(3),
            MaxFeatures::Rule(MaxFeatureRule::Sqrt) => (n_features as f64).sqrt().ceil() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Name of a registered split strategy.
    pub variant: String,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// `None` uses the variant's default.
    pub bootstrap: Option<bool>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            variant: "random_forest".to_string(),
            max_features: MaxFeatures::Rule(MaxFeatureRule::Third),
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bootstrap: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::field("n_trees", "must be ≥ 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::field("min_samples_leaf", "must be ≥ 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::field("min_samples_split", "must be ≥ 2"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::field("max_depth", "must be ≥ 1 when set"));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::field("max_features", "must be ≥ 1"));
        }
        StrategyRegistry::with_builtin().get(&self.variant)?;
        Ok(())
    }
}

/// Anything that maps a feature row to a prediction.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        for row in x {
            if row.len() != self.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features(),
                    found: row.len(),
                });
            }
        }
        Ok(x.par_iter().map(|r| self.predict_row(r)).collect())
    }
}

pub const MODEL_FORMAT: &str = "qrcg2-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub version: u32,
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        s / self.trees.len() as f64
    }
}

impl ForestModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model document {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}

/// Trains a forest. Tree `t` draws from its own stream `(seed, "tree", t)`,
/// so the result does not depend on the thread count.
pub fn fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least two training rows"));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::invalid("feature rows are empty"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            }
            .with_sample(i));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training features").with_sample(i));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets"));
    }

    let registry = StrategyRegistry::with_builtin();
    let strategy = registry.get(&config.variant)?;
    let bootstrap = config.bootstrap.unwrap_or(strategy.default_bootstrap());
    let params = TreeParams {
        strategy,
        max_features: config.max_features.resolve(d),
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        min_samples_split: config.min_samples_split,
    };
    let n = x.len();
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(config.seed, "tree", t as u64);
            let rows = if bootstrap {
                bootstrap_rows(n, &mut rng)
            } else {
                (0..n).collect()
            };
            Tree::grow(x, y, rows, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: config.clone(),
        n_features: d,
        trees,
    })
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_rows(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

pub fn predict(model: &ForestModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict(x)
}

fn check_pair(predicted: &[f64], truth: &[f64]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("empty prediction set"));
    }
    Ok(())
}

/// Normalized error `Σ(p − t)² / Σ(p + t)²`.
pub fn mse_metric(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let num: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    let den: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p + t).powi(2))
        .sum();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("normalized MSE"));
    }
    Ok(num / den)
}

/// Ordinary mean of squared errors.
pub fn conventional_mse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let s: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(s / truth.len() as f64)
}

/// Coefficient of determination.
pub fn r_squared(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroDenominator("R²"));
    }
    let ss_res: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
