use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ensemble::ForestConfig;
use crate::error::{Error, Result};
use crate::reservoir::ReservoirConfig;
use crate::seed;
use crate::sources::{Axis, ParamMap, SourceRegistry, SweepSpec};

/// One dataset to generate: a source family, fixed parameters and a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// File stem and reference name; defaults to the family slug.
    #[serde(default)]
    pub name: Option<String>,
    pub family: String,
    /// Overrides of the family defaults that stay fixed over the sweep.
    #[serde(default)]
    pub base: ParamMap,
    pub sweep: SweepSpec,
    /// Overrides the experiment-wide test fraction.
    #[serde(default)]
    pub test_fraction: Option<f64>,
    /// Sweep points allowed to fail before generation is aborted.
    #[serde(default)]
    pub max_failures: usize,
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.family)
    }

    fn grid(name: &str, family: &str, base: &[(&str, f64)], axes: Vec<Axis>, test: f64) -> Self {
        DatasetSpec {
            name: Some(name.to_string()),
            family: family.to_string(),
            base: base.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            sweep: SweepSpec::Grid { axes },
            test_fraction: Some(test),
            max_failures: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossSpec {
    /// Dataset names entering the cross matrix, one per family.
    pub datasets: Vec<String>,
}

impl Default for CrossSpec {
    fn default() -> Self {
        CrossSpec {
            datasets: ["3b-mix", "em-in-cav", "ph-added", "coh-2ls-mix"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    /// Dataset whose training split fits the model.
    pub model: String,
    /// Datasets scored segment by segment.
    pub targets: Vec<String>,
    pub n_parts: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            model: "3b-mix".into(),
            targets: ["em-in-cav", "ph-added", "coh-2ls-mix"]
                .map(String::from)
                .to_vec(),
            n_parts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizationSpec {
    pub family: String,
    /// Parameter held at discrete values.
    pub param: String,
    pub train_values: Vec<f64>,
    pub test_value: f64,
    pub base: ParamMap,
    /// Sweep run at every value of `param`.
    pub sweep: SweepSpec,
}

impl Default for GeneralizationSpec {
    fn default() -> Self {
        GeneralizationSpec {
            family: "em-in-cav".into(),
            param: "delta_b".into(),
            train_values: vec![1.0, 1.6, 1.8],
            test_value: 1.4,
            base: ParamMap::new(),
            sweep: SweepSpec::Grid {
                axes: vec![Axis::linspace("delta_a", -5.0, 5.0, 500)],
            },
        }
    }
}

impl GeneralizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_values.is_empty() {
            return Err(Error::field(
                "generalization.train_values",
                "must not be empty",
            ));
        }
        if self
            .train_values
            .iter()
            .any(|v| (v - self.test_value).abs() <= 1e-12)
        {
            return Err(Error::field(
                "generalization.test_value",
                format!("{} is also a training value", self.test_value),
            ));
        }
        if self.sweep.swept_params().contains(&self.param) {
            return Err(Error::field(
                "generalization.param",
                "must not also be swept",
            ));
        }
        self.sweep.validate()
    }
}

/// Everything an experiment run needs. Seed fields inside `reservoir` and
/// `forest` are overwritten from `root_seed` on resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub root_seed: u64,
    pub reservoir: ReservoirConfig,
    pub forest: ForestConfig,
    pub test_fraction: f64,
    pub datasets: Vec<DatasetSpec>,
    pub cross: CrossSpec,
    pub partition: PartitionSpec,
    pub generalization: GeneralizationSpec,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lin = Axis::linspace;
        ExperimentConfig {
            root_seed: 1,
            reservoir: ReservoirConfig::default(),
            forest: ForestConfig {
                variant: "extra_trees".into(),
                ..ForestConfig::default()
            },
            test_fraction: 0.25,
            datasets: vec![
                DatasetSpec {
                    name: Some("3b-mix".into()),
                    family: "3b-mix".into(),
                    base: ParamMap::new(),
                    sweep: SweepSpec::Random {
                        n_samples: 1024,
                        ranges: [
                            ("theta".to_string(), [0.0, PI]),
                            ("phi".to_string(), [0.0, 2.0 * PI]),
                        ]
                        .into(),
                        choices: BTreeMap::new(),
                    },
                    test_fraction: Some(0.25),
                    max_failures: 0,
                },
                DatasetSpec::grid(
                    "em-in-cav",
                    "em-in-cav",
                    &[],
                    vec![lin("delta_a", -5.0, 5.0, 8000)],
                    0.2,
                ),
                DatasetSpec::grid(
                    "ph-added",
                    "ph-added",
                    &[("m", 1.0)],
                    vec![lin("r", 0.05, 0.7, 1000)],
                    0.2,
                ),
                DatasetSpec::grid(
                    "ph-added-mixed",
                    "ph-added",
                    &[],
                    vec![
                        Axis::values("m", vec![1.0, 3.0, 5.0]),
                        lin("r", 0.05, 0.5, 334),
                    ],
                    0.2,
                ),
                DatasetSpec::grid(
                    "coh-2ls-mix",
                    "coh-2ls-mix",
                    &[],
                    vec![lin("delta_a", -5.0, 5.0, 1000)],
                    0.2,
                ),
            ],
            cross: CrossSpec::default(),
            partition: PartitionSpec::default(),
            generalization: GeneralizationSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Seeds derived from the root as `(root, tag, index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedSeeds {
    pub root: u64,
    /// `(root, "reservoir", 0)`
    pub reservoir: u64,
    /// `(root, "forest", 0)`
    pub forest: u64,
    /// `(root, "split", 0)`
    pub split: u64,
    /// `(root, "sweep", i)` for the i-th dataset, keyed by name.
    pub sweeps: BTreeMap<String, u64>,
    /// `(root, "generalization", 0)`
    pub generalization: u64,
}

impl ExperimentConfig {
    /// Same experiment with the Em-in-Cav set shrunk to 2000 samples.
    pub fn desk_scale() -> Self {
        let mut c = Self::default();
        for d in &mut c.datasets {
            if d.name() == "em-in-cav" {
                d.sweep = SweepSpec::Grid {
                    axes: vec![Axis::linspace("delta_a", -5.0, 5.0, 2000)],
                };
            }
        }
        c
    }

    pub fn seeds(&self) -> ResolvedSeeds {
        let r = self.root_seed;
        ResolvedSeeds {
            root: r,
            reservoir: seed::derive_u64(r, "reservoir", 0),
            forest: seed::derive_u64(r, "forest", 0),
            split: seed::derive_u64(r, "split", 0),
            sweeps: self
                .datasets
                .iter()
                .enumerate()
                .map(|(i, d)| (d.name().to_string(), seed::derive_u64(r, "sweep", i as u64)))
                .collect(),
            generalization: seed::derive_u64(r, "generalization", 0),
        }
    }

    /// Fills derived seeds and checks every cross-reference.
    pub fn resolve(mut self) -> Result<Self> {
        let s = self.seeds();
        self.reservoir.seed = s.reservoir;
        self.forest.seed = s.forest;
        self.validate()?;
        Ok(self)
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetSpec> {
        self.datasets
            .iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| Error::UnknownName {
                kind: "dataset",
                name: name.to_string(),
            })
    }

    pub fn test_fraction_for(&self, name: &str) -> Result<f64> {
        Ok(self
            .dataset(name)?
            .test_fraction
            .unwrap_or(self.test_fraction))
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        self.forest.validate()?;
        check_fraction("test_fraction", self.test_fraction)?;
        let registry = SourceRegistry::with_builtin();
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name()) {
                return Err(Error::field(
                    "datasets",
                    format!("duplicate name `{}`", d.name()),
                ));
            }
            let family = registry.get(&d.family)?;
            for p in d.base.keys().cloned().chain(d.sweep.swept_params()) {
                if !family.param_names().contains(&p.as_str()) {
                    return Err(Error::field(
                        format!("datasets.{}.{p}", d.name()),
                        format!("not a parameter of {}", family.name()),
                    ));
                }
            }
            d.sweep
                .validate()
                .map_err(|e| prefix_field(e, &format!("datasets.{}.sweep", d.name())))?;
            if let Some(f) = d.test_fraction {
                check_fraction(&format!("datasets.{}.test_fraction", d.name()), f)?;
            }
        }
        for n in self.cross.datasets.iter().chain(&self.partition.targets) {
            self.dataset(n)?;
        }
        self.dataset(&self.partition.model)?;
        if self.partition.n_parts == 0 {
            return Err(Error::field("partition.n_parts", "must be ≥ 1"));
        }
        registry.get(&self.generalization.family)?;
        self.generalization.validate()
    }
}

fn check_fraction(field: &str, f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::field(field, format!("must lie in (0, 1), got {f}")))
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidField { field, reason } => Error::InvalidField {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_round_trip() {
        let c = ExperimentConfig::default().resolve().unwrap();
        assert_eq!(c.reservoir.seed, c.seeds().reservoir);
        let json = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"root_seed": 9}"#).unwrap();
        assert_eq!(partial.datasets.len(), 5);
        assert_ne!(partial.seeds().forest, c.seeds().forest);
    }

    #[test]
    fn bad_references_are_named() {
        let mut c = ExperimentConfig::default();
        c.cross.datasets.push("nope".into());
        assert!(matches!(c.validate(), Err(Error::UnknownName { .. })));

        let mut c = ExperimentConfig::default();
        c.generalization.test_value = 1.6;
        let err = c.validate().unwrap_err();
        assert!(
            err.to_string().contains("generalization.test_value"),
            "{err}"
        );

        let mut c = ExperimentConfig::default();
        c.datasets[0].sweep = SweepSpec::Random {
            n_samples: 3,
            ranges: [("theta".to_string(), [0.0, f64::NAN])].into(),
            choices: BTreeMap::new(),
        };
        let err = c.validate().unwrap_err();
        assert!(
            err.to_string().contains("datasets.3b-mix.sweep.theta"),
            "{err}"
        );
    }
}
