//! Dataset generation, train/test protocols, cross-family evaluation,
//! partitioned error and the detuning generalization sweep.

mod config;
mod io;
mod pipeline;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ensemble::{conventional_mse, fit, mse_metric, ForestConfig, ForestModel, Predictor};
use crate::error::{Error, Result};
use crate::reservoir::{baseline_features, reservoir_features, ReservoirInstance};
use crate::seed;
use crate::sources::{sweep_source, ParamMap, SourceId, SourceRegistry, SweepFailure};

pub use config::{
    CrossSpec, DatasetSpec, ExperimentConfig, GeneralizationSpec, PartitionSpec, ResolvedSeeds,
};
pub use io::{
    read_dataset, read_json, write_dataset, write_json_atomic, DatasetManifest, ReportDocument,
    DATASET_FORMAT, TOOL_VERSION,
};
pub use pipeline::{PartitionReport, Pipeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub source_id: SourceId,
    /// Swept parameter values only.
    pub params: ParamMap,
    pub features_reservoir: Vec<f64>,
    pub features_baseline: Vec<f64>,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub source_id: SourceId,
    /// Column order of the swept parameters.
    pub param_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub reservoir_fingerprint: String,
    pub generation_seed: u64,
    /// Sweep points that could not be built and were left out.
    pub failures: Vec<SweepFailure>,
}

/// Which feature set a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    WithReservoir,
    Baseline,
}

impl FeatureMode {
    pub const BOTH: [FeatureMode; 2] = [FeatureMode::WithReservoir, FeatureMode::Baseline];

    fn pick(self, s: &Sample) -> &[f64] {
        match self {
            FeatureMode::WithReservoir => &s.features_reservoir,
            FeatureMode::Baseline => &s.features_baseline,
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_reservoir_features(&self) -> usize {
        self.samples
            .first()
            .map_or(0, |s| s.features_reservoir.len())
    }

    pub fn n_baseline_features(&self) -> usize {
        self.samples
            .first()
            .map_or(0, |s| s.features_baseline.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid(format!("dataset `{}` is empty", self.name)));
        }
        let (k, b) = (self.n_reservoir_features(), self.n_baseline_features());
        for (i, s) in self.samples.iter().enumerate() {
            if s.id != i {
                return Err(Error::invalid(format!(
                    "dataset `{}`: ids must be contiguous from 0, found {} at row {i}",
                    self.name, s.id
                )));
            }
            if s.source_id != self.source_id {
                return Err(Error::invalid(format!(
                    "sample {i} has a foreign source id"
                )));
            }
            if s.features_reservoir.len() != k || s.features_baseline.len() != b {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: s.features_reservoir.len(),
                }
                .with_sample(i));
            }
            if !s.label.is_finite() || s.label < 0.0 {
                return Err(Error::field("label_g2", "must be finite and ≥ 0").with_sample(i));
            }
            if s.params.keys().ne(sorted(&self.param_names).iter()) {
                return Err(Error::invalid(format!(
                    "sample {i} has a different parameter set"
                )));
            }
        }
        Ok(())
    }

    fn rows(&self, ids: &[usize], mode: FeatureMode) -> (Vec<Vec<f64>>, Vec<f64>) {
        ids.iter()
            .map(|&i| {
                let s = &self.samples[i];
                (mode.pick(s).to_vec(), s.label)
            })
            .unzip()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

fn sorted(names: &[String]) -> Vec<String> {
    let mut v = names.to_vec();
    v.sort();
    v
}

/// Builds every sweep point of `spec` and computes both feature sets
/// against `reservoir`.
pub fn generate_dataset(
    registry: &SourceRegistry,
    spec: &DatasetSpec,
    reservoir: &ReservoirInstance,
    seed: u64,
) -> Result<Dataset> {
    let family = registry.get(&spec.family)?;
    let outcome = sweep_source(family, &spec.base, &spec.sweep, seed)?;
    let total = outcome.sources.len() + outcome.failures.len();
    if outcome.failures.len() > spec.max_failures || outcome.sources.is_empty() {
        let summary = outcome
            .failures
            .iter()
            .take(5)
            .map(|f| format!("#{} {:?}: {}", f.index, f.params, f.error))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::SweepFailures {
            failed: outcome.failures.len(),
            total,
            summary,
        });
    }
    let (params, sources): (Vec<ParamMap>, Vec<_>) = outcome
        .sources
        .into_iter()
        .map(|s| (s.params, s.source))
        .unzip();
    let feats = reservoir_features(reservoir, &sources)?;
    let samples = sources
        .iter()
        .zip(params)
        .zip(feats)
        .enumerate()
        .map(|(id, ((src, params), f))| {
            Ok(Sample {
                id,
                source_id: src.source_id,
                params,
                features_reservoir: f,
                features_baseline: baseline_features(src).map_err(|e| e.with_sample(id))?,
                label: src.label_g2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset {
        name: spec.name().to_string(),
        source_id: family.id(),
        param_names: spec.sweep.swept_params(),
        samples,
        reservoir_fingerprint: reservoir.fingerprint(),
        generation_seed: seed,
        failures: outcome.failures,
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Seeded random partition of the sample ids into `(train, test)`, each
/// sorted ascending. The test set has `round(n · fraction)` members.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.test_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::field(
            "test_fraction",
            format!("must lie in (0, 1), got {f}"),
        ));
    }
    let n = dataset.len();
    let n_test = (n as f64 * f).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::field(
            "test_fraction",
            format!("{f} of {n} samples leaves an empty side"),
        ));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut seed::rng(spec.seed, "split", 0));
    let mut test = ids[..n_test].to_vec();
    let mut train = ids[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: usize,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: FeatureMode,
    pub train_dataset: String,
    pub test_dataset: String,
    /// Normalized error `Σ(p − t)² / Σ(p + t)²`.
    pub mse: f64,
    /// Plain mean squared error, for reference only.
    pub conventional_mse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub per_sample: Vec<Prediction>,
}

pub fn fit_model(
    dataset: &Dataset,
    ids: &[usize],
    mode: FeatureMode,
    forest: &ForestConfig,
) -> Result<ForestModel> {
    let (x, y) = dataset.rows(ids, mode);
    fit(&x, &y, forest)
}

/// Scores `model` on the given samples of `dataset`.
pub fn evaluate(
    model: &dyn Predictor,
    dataset: &Dataset,
    ids: &[usize],
    mode: FeatureMode,
) -> Result<(f64, f64, Vec<Prediction>)> {
    let (x, y) = dataset.rows(ids, mode);
    let p = model.predict(&x)?;
    let per_sample = ids
        .iter()
        .zip(&y)
        .zip(&p)
        .map(|((&id, &truth), &prediction)| Prediction {
            id,
            truth,
            prediction,
        })
        .collect();
    Ok((mse_metric(&p, &y)?, conventional_mse(&p, &y)?, per_sample))
}

pub fn train_and_eval(
    dataset: &Dataset,
    mode: FeatureMode,
    forest: &ForestConfig,
    split_spec: &SplitSpec,
) -> Result<EvalReport> {
    dataset.validate()?;
    let (train, test) = split(dataset, split_spec)?;
    let model = fit_model(dataset, &train, mode, forest)?;
    let (mse, conv, per_sample) = evaluate(&model, dataset, &test, mode)?;
    Ok(EvalReport {
        mode,
        train_dataset: dataset.name.clone(),
        test_dataset: dataset.name.clone(),
        mse,
        conventional_mse: conv,
        n_train: train.len(),
        n_test: test.len(),
        per_sample,
    })
}

/// Row = test family, column = training family, in [`SourceId::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalMatrix {
    pub ids: Vec<SourceId>,
    pub datasets: Vec<String>,
    pub mse: Vec<Vec<f64>>,
    pub n_test: Vec<usize>,
}

impl CrossEvalMatrix {
    pub fn get(&self, test: SourceId, train: SourceId) -> f64 {
        let i = self.ids.iter().position(|&x| x == test).expect("known id");
        let j = self.ids.iter().position(|&x| x == train).expect("known id");
        self.mse[i][j]
    }
}

/// Trains one reservoir-feature model per family on its training split and
/// scores it on every family's test split.
pub fn cross_evaluate(
    datasets: &[(&Dataset, SplitSpec)],
    forest: &ForestConfig,
) -> Result<CrossEvalMatrix> {
    let mut by_id: BTreeMap<SourceId, (&Dataset, SplitSpec)> = BTreeMap::new();
    for &(d, s) in datasets {
        if by_id.insert(d.source_id, (d, s)).is_some() {
            return Err(Error::invalid(format!("two datasets for {}", d.source_id)));
        }
    }
    let missing: Vec<&str> = SourceId::ALL
        .iter()
        .filter(|id| !by_id.contains_key(id))
        .map(|id| id.slug())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "missing datasets: {}",
            missing.join(", ")
        )));
    }
    let ordered: Vec<(&Dataset, SplitSpec)> = SourceId::ALL.iter().map(|id| by_id[id]).collect();
    let k = ordered[0].0.n_reservoir_features();
    let fp = &ordered[0].0.reservoir_fingerprint;
    for (d, _) in &ordered {
        d.validate()?;
        if d.n_reservoir_features() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: d.n_reservoir_features(),
            });
        }
        if &d.reservoir_fingerprint != fp {
            return Err(Error::invalid(format!(
                "dataset `{}` was generated with a different reservoir",
                d.name
            )));
        }
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = ordered
        .iter()
        .map(|(d, s)| split(d, s))
        .collect::<Result<_>>()?;
    let models: Vec<ForestModel> = ordered
        .iter()
        .zip(&splits)
        .map(|((d, _), (train, _))| fit_model(d, train, FeatureMode::WithReservoir, forest))
        .collect::<Result<_>>()?;
    let mut mse = vec![vec![0.0; 4]; 4];
    for (i, ((d, _), (_, test))) in ordered.iter().zip(&splits).enumerate() {
        for (j, m) in models.iter().enumerate() {
            mse[i][j] = evaluate(m, d, test, FeatureMode::WithReservoir)?.0;
        }
    }
    Ok(CrossEvalMatrix {
        ids: SourceId::ALL.to_vec(),
        datasets: ordered.iter().map(|(d, _)| d.name.clone()).collect(),
        mse,
        n_test: splits.iter().map(|(_, t)| t.len()).collect(),
    })
}

/// Normalized error on `n_parts` contiguous segments of the dataset in
/// generation order. Earlier segments take the remainder samples.
pub fn partition_mse(
    model: &dyn Predictor,
    dataset: &Dataset,
    mode: FeatureMode,
    n_parts: usize,
) -> Result<Vec<f64>> {
    let n = dataset.len();
    if n_parts == 0 {
        return Err(Error::field("n_parts", "must be ≥ 1"));
    }
    if n < n_parts {
        return Err(Error::invalid(format!(
            "{n} samples cannot fill {n_parts} segments"
        )));
    }
    let (base, extra) = (n / n_parts, n % n_parts);
    let mut out = Vec::with_capacity(n_parts);
    let mut start = 0;
    for p in 0..n_parts {
        let len = base + usize::from(p < extra);
        let ids: Vec<usize> = (start..start + len).collect();
        out.push(evaluate(model, dataset, &ids, mode)?.0);
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub param: String,
    pub train_values: Vec<f64>,
    pub test_value: f64,
    pub report: EvalReport,
}

/// Trains on the union of sweeps at `train_values` of `spec.param` and
/// tests on the sweep at the held-out `test_value`.
pub fn generalization_sweep(
    registry: &SourceRegistry,
    spec: &GeneralizationSpec,
    reservoir: &ReservoirInstance,
    forest: &ForestConfig,
    seed: u64,
) -> Result<GeneralizationReport> {
    spec.validate()?;
    let build = |value: f64, tag: &str| -> Result<Dataset> {
        let mut base = spec.base.clone();
        base.insert(spec.param.clone(), value);
        let ds = DatasetSpec {
            name: Some(format!("{}-{}={value}", spec.family, spec.param)),
            family: spec.family.clone(),
            base,
            sweep: spec.sweep.clone(),
            test_fraction: None,
            max_failures: 0,
        };
        generate_dataset(registry, &ds, reservoir, seed::derive_u64(seed, tag, 0))
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &v in &spec.train_values {
        let d = build(v, "generalization-train")?;
        let all: Vec<usize> = (0..d.len()).collect();
        let (xi, yi) = d.rows(&all, FeatureMode::WithReservoir);
        x.extend(xi);
        y.extend(yi);
    }
    let model = fit(&x, &y, forest)?;
    let test = build(spec.test_value, "generalization-test")?;
    let ids: Vec<usize> = (0..test.len()).collect();
    let (mse, conv, per_sample) = evaluate(&model, &test, &ids, FeatureMode::WithReservoir)?;
    Ok(GeneralizationReport {
        param: spec.param.clone(),
        train_values: spec.train_values.clone(),
        test_value: spec.test_value,
        report: EvalReport {
            mode: FeatureMode::WithReservoir,
            train_dataset: format!("{} {}∈{:?}", spec.family, spec.param, spec.train_values),
            test_dataset: test.name.clone(),
            mse,
            conventional_mse: conv,
            n_train: y.len(),
            n_test: ids.len(),
            per_sample,
        },
    })
}

/// Sample ids shared by two id lists, for leakage checks.
pub fn overlap(a: &[usize], b: &[usize]) -> Vec<usize> {
    let a: BTreeSet<_> = a.iter().collect();
    b.iter().filter(|i| a.contains(i)).copied().collect()
}
