use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ParamMap, PreparedSource, SourceFamily};
use crate::error::{Error, Result};
use crate::seed;

/// Values taken by one grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisPoints {
    Linspace { start: f64, stop: f64, n: usize },
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: String,
    #[serde(flatten)]
    pub points: AxisPoints,
}

impl Axis {
    pub fn linspace(param: &str, start: f64, stop: f64, n: usize) -> Self {
        Axis {
            param: param.to_string(),
            points: AxisPoints::Linspace { start, stop, n },
        }
    }

    pub fn values(param: &str, values: Vec<f64>) -> Self {
        Axis {
            param: param.to_string(),
            points: AxisPoints::Values(values),
        }
    }

    fn expand(&self) -> Result<Vec<f64>> {
        match &self.points {
            AxisPoints::Linspace { start, stop, n } => {
                if *n == 0 || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::field(
                        &self.param,
                        "linspace needs finite endpoints and n ≥ 1",
                    ));
                }
                if *n == 1 {
                    return Ok(vec![*start]);
                }
                let step = (stop - start) / (*n - 1) as f64;
                Ok((0..*n).map(|i| start + step * i as f64).collect())
            }
            AxisPoints::Values(v) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::field(
                        &self.param,
                        "values must be finite and non-empty",
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

/// How the swept parameters are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Cartesian product of the axes; the first axis varies slowest.
    Grid { axes: Vec<Axis> },
    /// Independent uniform draws per sample from `ranges`, plus a uniform
    /// pick from each list in `choices`.
    Random {
        n_samples: usize,
        #[serde(default)]
        ranges: BTreeMap<String, [f64; 2]>,
        #[serde(default)]
        choices: BTreeMap<String, Vec<f64>>,
    },
}

impl SweepSpec {
    pub fn swept_params(&self) -> Vec<String> {
        match self {
            SweepSpec::Grid { axes } => axes.iter().map(|a| a.param.clone()).collect(),
            SweepSpec::Random {
                ranges, choices, ..
            } => ranges.keys().chain(choices.keys()).cloned().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.swept_params();
        if names.is_empty() {
            return Err(Error::invalid("sweep has no swept parameters"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::field(n, "swept more than once"));
            }
        }
        match self {
            SweepSpec::Grid { axes } => {
                for a in axes {
                    a.expand()?;
                }
            }
            SweepSpec::Random {
                n_samples,
                ranges,
                choices,
            } => {
                if *n_samples == 0 {
                    return Err(Error::field("n_samples", "must be ≥ 1"));
                }
                for (k, [lo, hi]) in ranges {
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return Err(Error::field(k, "range needs finite lo ≤ hi"));
                    }
                }
                for (k, v) in choices {
                    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::field(k, "choices must be finite and non-empty"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The swept assignments, in sample order.
    pub fn points(&self, seed: u64) -> Result<Vec<ParamMap>> {
        self.validate()?;
        match self {
            SweepSpec::Grid { axes } => {
                let expanded: Vec<Vec<f64>> =
                    axes.iter().map(Axis::expand).collect::<Result<_>>()?;
                let mut out = vec![ParamMap::new()];
                for (axis, vals) in axes.iter().zip(&expanded) {
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            vals.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.insert(axis.param.clone(), v);
                                q
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
            SweepSpec::Random {
                n_samples,
                ranges,
                choices,
            } => Ok((0..*n_samples)
                .map(|i| {
                    let mut rng = seed::rng(seed, "sweep", i as u64);
                    let mut p = ParamMap::new();
                    for (k, [lo, hi]) in ranges {
                        let u: f64 = rng.random();
                        p.insert(k.clone(), lo + (hi - lo) * u);
                    }
                    for (k, v) in choices {
                        p.insert(k.clone(), v[rng.random_range(0..v.len())]);
                    }
                    p
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweptSource {
    pub index: usize,
    /// Only the swept values.
    pub params: ParamMap,
    pub source: PreparedSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub params: ParamMap,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub sources: Vec<SweptSource>,
    pub failures: Vec<SweepFailure>,
}

/// Builds every point of the sweep. Build failures are collected, not fatal.
pub fn sweep_source(
    family: &dyn SourceFamily,
    base: &ParamMap,
    sweep: &SweepSpec,
    seed: u64,
) -> Result<SweepOutcome> {
    for name in base.keys().cloned().chain(sweep.swept_params()) {
        if !family.param_names().contains(&name.as_str()) {
            return Err(Error::UnknownName {
                kind: "source parameter",
                name: format!("{name} (family {})", family.name()),
            });
        }
    }
    let points = sweep.points(seed)?;
    let built: Vec<(ParamMap, Result<PreparedSource>)> = points
        .into_par_iter()
        .map(|p| {
            let mut full = base.clone();
            full.extend(p.iter().map(|(k, v)| (k.clone(), *v)));
            let r = family.build(&full);
            (p, r)
        })
        .collect();
    let mut out = SweepOutcome::default();
    for (index, (params, r)) in built.into_iter().enumerate() {
        match r {
            Ok(source) => out.sources.push(SweptSource {
                index,
                params,
                source,
            }),
            Err(e) => out.failures.push(SweepFailure {
                index,
                params,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::SourceRegistry;

    #[test]
    fn grid_order_first_axis_outermost() {
        let s = SweepSpec::Grid {
            axes: vec![
                Axis::values("a", vec![1.0, 2.0]),
                Axis::linspace("b", 0.0, 1.0, 3),
            ],
        };
        let pts = s.points(0).unwrap();
        let flat: Vec<(f64, f64)> = pts.iter().map(|p| (p["a"], p["b"])).collect();
        assert_eq!(
            flat,
            vec![
                (1.0, 0.0),
                (1.0, 0.5),
                (1.0, 1.0),
                (2.0, 0.0),
                (2.0, 0.5),
                (2.0, 1.0)
            ]
        );
    }

    #[test]
    fn random_is_seeded_and_in_range() {
        let s = SweepSpec::Random {
            n_samples: 50,
            ranges: [("theta".to_string(), [0.0, 1.0])].into(),
            choices: [("m".to_string(), vec![1.0, 3.0, 5.0])].into(),
        };
        let a = s.points(9).unwrap();
        assert_eq!(a, s.points(9).unwrap());
        assert_ne!(a, s.points(10).unwrap());
        assert!(a.iter().all(|p| (0.0..=1.0).contains(&p["theta"])));
        assert!(a.iter().all(|p| [1.0, 3.0, 5.0].contains(&p["m"])));
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let reg = SourceRegistry::with_builtin();
        let fam = reg.get("ph-added").unwrap();
        let s = SweepSpec::Grid {
            axes: vec![Axis::values("r", vec![0.3, 2.5, 0.4])],
        };
        let out = sweep_source(fam, &ParamMap::new(), &s, 0).unwrap();
        assert_eq!(out.sources.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].index, 1);
        assert_eq!(out.sources[1].index, 2);
    }

    #[test]
    fn unknown_swept_parameter_is_rejected() {
        let reg = SourceRegistry::with_builtin();
        let fam = reg.get("3b-mix").unwrap();
        let s = SweepSpec::Grid {
            axes: vec![Axis::values("psi", vec![0.3])],
        };
        let err = sweep_source(fam, &ParamMap::new(), &s, 0).unwrap_err();
        assert!(err.to_string().contains("psi"));
    }

    #[test]
    fn sweep_json_shape() {
        let s: SweepSpec = serde_json::from_str(
            r#"{"mode":"grid","axes":[{"param":"delta_a","linspace":{"start":-5,"stop":5,"n":11}}]}"#,
        )
        .unwrap();
        assert_eq!(s.points(0).unwrap().len(), 11);
        let back: SweepSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
