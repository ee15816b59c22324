use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Dataset, ExperimentConfig, ResolvedSeeds, Sample};
use crate::error::{Error, Result};
use crate::sources::{ParamMap, SourceId, SweepFailure};

pub const TOOL_VERSION: &str = concat!("qrcg2 ", env!("CARGO_PKG_VERSION"));
pub const DATASET_FORMAT: &str = "qrcg2-dataset";

/// Sidecar JSON written next to every dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub tool_version: String,
    pub name: String,
    pub source_id: SourceId,
    pub reservoir_fingerprint: String,
    pub generation_seed: u64,
    pub n_samples: usize,
    pub n_reservoir_features: usize,
    pub n_baseline_features: usize,
    pub param_names: Vec<String>,
    pub failures: Vec<SweepFailure>,
    pub seeds: ResolvedSeeds,
    pub config: ExperimentConfig,
}

/// Report wrapper that carries the resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument<T> {
    pub kind: String,
    pub tool_version: String,
    pub seeds: ResolvedSeeds,
    pub config: ExperimentConfig,
    pub body: T,
}

impl<T> ReportDocument<T> {
    pub fn new(kind: &str, config: &ExperimentConfig, body: T) -> Self {
        ReportDocument {
            kind: kind.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            seeds: config.seeds(),
            config: config.clone(),
            body,
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to a temporary file beside `path`, then renames it.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

fn header(ds: &Dataset) -> Vec<String> {
    let mut h = vec!["id".to_string(), "source_id".to_string()];
    h.extend(ds.param_names.iter().cloned());
    h.extend((0..ds.n_reservoir_features()).map(|k| format!("f{k}")));
    h.extend((0..ds.n_baseline_features()).map(|k| format!("b{k}")));
    h.push("label_g2".into());
    h
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header(ds))?;
    for s in &ds.samples {
        let mut row = vec![s.id.to_string(), s.source_id.slug().to_string()];
        row.extend(ds.param_names.iter().map(|p| fmt_f64(s.params[p])));
        row.extend(s.features_reservoir.iter().map(|&v| fmt_f64(v)));
        row.extend(s.features_baseline.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.label));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.manifest.json`.
pub fn write_dataset(dir: &Path, ds: &Dataset, config: &ExperimentConfig) -> Result<()> {
    ds.validate()?;
    write_atomic(&dir.join(format!("{}.csv", ds.name)), &csv_bytes(ds)?)?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        name: ds.name.clone(),
        source_id: ds.source_id,
        reservoir_fingerprint: ds.reservoir_fingerprint.clone(),
        generation_seed: ds.generation_seed,
        n_samples: ds.len(),
        n_reservoir_features: ds.n_reservoir_features(),
        n_baseline_features: ds.n_baseline_features(),
        param_names: ds.param_names.clone(),
        failures: ds.failures.clone(),
        seeds: config.seeds(),
        config: config.clone(),
    };
    write_json_atomic(&dir.join(format!("{}.manifest.json", ds.name)), &manifest)
}

fn parse_f64(field: &str, s: &str, row: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::field(field, format!("`{s}` is not a number")).with_sample(row))
}

/// Reads a dataset written by [`write_dataset`], checking the CSV against
/// its manifest.
pub fn read_dataset(dir: &Path, name: &str) -> Result<(Dataset, DatasetManifest)> {
    let manifest: DatasetManifest = read_json(&dir.join(format!("{name}.manifest.json")))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::invalid(format!(
            "`{name}` manifest has format {}",
            manifest.format
        )));
    }
    let mut r = csv::Reader::from_path(dir.join(format!("{name}.csv")))?;
    let (p, k, b) = (
        manifest.param_names.len(),
        manifest.n_reservoir_features,
        manifest.n_baseline_features,
    );
    let mut ds = Dataset {
        name: manifest.name.clone(),
        source_id: manifest.source_id,
        param_names: manifest.param_names.clone(),
        samples: Vec::with_capacity(manifest.n_samples),
        reservoir_fingerprint: manifest.reservoir_fingerprint.clone(),
        generation_seed: manifest.generation_seed,
        failures: manifest.failures.clone(),
    };
    let expected = header(&Dataset {
        samples: vec![Sample {
            id: 0,
            source_id: manifest.source_id,
            params: ParamMap::new(),
            features_reservoir: vec![0.0; k],
            features_baseline: vec![0.0; b],
            label: 0.0,
        }],
        ..ds.clone()
    });
    let got: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if got != expected {
        return Err(Error::invalid(format!(
            "`{name}.csv` header does not match its manifest"
        )));
    }
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let id: usize = rec[0].parse().map_err(|_| {
            Error::field("id", format!("`{}` is not an id", &rec[0])).with_sample(row)
        })?;
        let source_id: SourceId = rec[1].parse()?;
        let params = ds
            .param_names
            .iter()
            .enumerate()
            .map(|(i, n)| Ok((n.clone(), parse_f64(n, &rec[2 + i], row)?)))
            .collect::<Result<ParamMap>>()?;
        let nums = |from: usize, len: usize, field: &str| -> Result<Vec<f64>> {
            (from..from + len)
                .map(|i| parse_f64(field, &rec[i], row))
                .collect()
        };
        ds.samples.push(Sample {
            id,
            source_id,
            params,
            features_reservoir: nums(2 + p, k, "features")?,
            features_baseline: nums(2 + p + k, b, "baseline")?,
            label: parse_f64("label_g2", &rec[2 + p + k + b], row)?,
        });
    }
    if ds.len() != manifest.n_samples {
        return Err(Error::invalid(format!(
            "`{name}.csv` has {} rows, manifest says {}",
            ds.len(),
            manifest.n_samples
        )));
    }
    ds.validate()?;
    Ok((ds, manifest))
}
