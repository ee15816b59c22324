use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    cross_evaluate, fit_model, generalization_sweep, generate_dataset, partition_mse, split,
    train_and_eval, CrossEvalMatrix, Dataset, EvalReport, ExperimentConfig, FeatureMode,
    GeneralizationReport, SplitSpec,
};
use crate::error::{Error, Result};
use crate::reservoir::{sample_reservoir, ReservoirInstance};
use crate::sources::SourceRegistry;

/// A resolved experiment with its one shared reservoir.
pub struct Pipeline {
    config: ExperimentConfig,
    registry: SourceRegistry,
    reservoir: ReservoirInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub model_dataset: String,
    pub n_parts: usize,
    /// Segment errors per target dataset, in generation order.
    pub segments: BTreeMap<String, Vec<f64>>,
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        Self::with_registry(config, SourceRegistry::with_builtin())
    }

    pub fn with_registry(config: ExperimentConfig, registry: SourceRegistry) -> Result<Self> {
        let config = config.resolve()?;
        let reservoir = sample_reservoir(&config.reservoir)?;
        Ok(Pipeline {
            config,
            registry,
            reservoir,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn reservoir(&self) -> &ReservoirInstance {
        &self.reservoir
    }

    pub fn generate(&self, name: &str) -> Result<Dataset> {
        let spec = self.config.dataset(name)?;
        let seed = self.config.seeds().sweeps[spec.name()];
        generate_dataset(&self.registry, spec, &self.reservoir, seed)
    }

    pub fn split_spec(&self, name: &str) -> Result<SplitSpec> {
        Ok(SplitSpec {
            test_fraction: self.config.test_fraction_for(name)?,
            seed: self.config.seeds().split,
        })
    }

    fn check_reservoir(&self, ds: &Dataset) -> Result<()> {
        if ds.reservoir_fingerprint != self.reservoir.fingerprint() {
            return Err(Error::invalid(format!(
                "dataset `{}` was generated with a different reservoir",
                ds.name
            )));
        }
        Ok(())
    }

    /// With-reservoir and baseline reports for one dataset.
    pub fn train_eval(&self, ds: &Dataset) -> Result<Vec<EvalReport>> {
        self.check_reservoir(ds)?;
        let s = self.split_spec(&ds.name)?;
        FeatureMode::BOTH
            .iter()
            .map(|&m| train_and_eval(ds, m, &self.config.forest, &s))
            .collect()
    }

    fn find<'a>(&self, datasets: &'a [Dataset], name: &str) -> Result<&'a Dataset> {
        let ds = datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::invalid(format!("dataset `{name}` has not been generated")))?;
        self.check_reservoir(ds)?;
        Ok(ds)
    }

    pub fn cross(&self, datasets: &[Dataset]) -> Result<CrossEvalMatrix> {
        let missing: Vec<&str> = self
            .config
            .cross
            .datasets
            .iter()
            .filter(|n| !datasets.iter().any(|d| &d.name == *n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::invalid(format!(
                "missing datasets: {}",
                missing.join(", ")
            )));
        }
        let entries = self
            .config
            .cross
            .datasets
            .iter()
            .map(|n| Ok((self.find(datasets, n)?, self.split_spec(n)?)))
            .collect::<Result<Vec<_>>>()?;
        cross_evaluate(&entries, &self.config.forest)
    }

    pub fn partition(&self, datasets: &[Dataset]) -> Result<PartitionReport> {
        let p = &self.config.partition;
        let source = self.find(datasets, &p.model)?;
        let (train, _) = split(source, &self.split_spec(&p.model)?)?;
        let model = fit_model(
            source,
            &train,
            FeatureMode::WithReservoir,
            &self.config.forest,
        )?;
        let mut segments = BTreeMap::new();
        for t in &p.targets {
            let ds = self.find(datasets, t)?;
            segments.insert(
                t.clone(),
                partition_mse(&model, ds, FeatureMode::WithReservoir, p.n_parts)?,
            );
        }
        Ok(PartitionReport {
            model_dataset: p.model.clone(),
            n_parts: p.n_parts,
            segments,
        })
    }

    pub fn generalization(&self) -> Result<GeneralizationReport> {
        generalization_sweep(
            &self.registry,
            &self.config.generalization,
            &self.reservoir,
            &self.config.forest,
            self.config.seeds().generalization,
        )
    }
}
