//! The fixed random qubit reservoir: sampling, pre-pumping, cascade
//! coupling of a source, and occupation readout.

mod cascade;
mod feature_map;

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{steady_state, IntegratorConfig, LindbladModel, Window};
use crate::error::{Error, Result};
use crate::quantum::{mode_operator, DensityMatrix, HilbertSpace, Ladder, ModeSpec, Operator};
use crate::seed;

pub use cascade::{baseline_features, cascade_evolution, cascade_model, run_cascade};
pub use feature_map::{
    reservoir_features, source_reduction, FeatureMap, SourceReduction, TRIM_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    pub n_nodes: usize,
    pub gamma: f64,
    pub pump: f64,
    pub eta: f64,
    pub win_scale: f64,
    pub spectral_target: f64,
    pub window: Window,
    pub sample_times: Vec<f64>,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        ReservoirConfig {
            n_nodes: 2,
            gamma: 1.0,
            pump: 0.2,
            eta: 2.0,
            win_scale: 1.0,
            spectral_target: 1.0,
            window: Window { t1: 0.0, t2: 5.0 },
            sample_times: (1..=10).map(|k| 0.5 + 9.5 * (k - 1) as f64 / 9.0).collect(),
            seed: 1,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.n_nodes > 6 {
            return Err(Error::field("n_nodes", "must lie in 1..=6"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::field("gamma", "must be finite and > 0"));
        }
        for (name, v) in [("pump", self.pump), ("eta", self.eta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::field(name, "must be finite and ≥ 0"));
            }
        }
        for (name, v) in [
            ("win_scale", self.win_scale),
            ("spectral_target", self.spectral_target),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::field(name, "must be finite and > 0"));
            }
        }
        self.window.validate()?;
        if self.sample_times.is_empty()
            || self.sample_times.iter().any(|t| !t.is_finite() || *t < 0.0)
            || self.sample_times.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::field(
                "sample_times",
                "must be non-empty, finite, ≥ 0 and strictly increasing",
            ));
        }
        self.integrator.validate()
    }

    pub fn n_features(&self) -> usize {
        self.n_nodes * self.sample_times.len()
    }
}

/// A sampled reservoir. Immutable once built.
#[derive(Debug)]
pub struct ReservoirInstance {
    config: ReservoirConfig,
    j: DMatrix<f64>,
    w_in: Vec<f64>,
    space: Arc<HilbertSpace>,
    hamiltonian: Operator,
    prepumped: OnceLock<DensityMatrix>,
}

/// Label of reservoir node `j`.
pub fn node_label(j: usize) -> String {
    format!("r{j}")
}

/// `Σ_ij J_ij (b_i† b_j + b_j† b_i)` on the node space.
fn reservoir_hamiltonian(space: &Arc<HilbertSpace>, j: &DMatrix<f64>) -> Result<Operator> {
    let n = j.nrows();
    let lowers: Vec<Operator> = (0..n)
        .map(|k| mode_operator(space, &node_label(k), Ladder::Lower))
        .collect::<Result<_>>()?;
    let mut h = Operator::zeros(space);
    for a in 0..n {
        for b in 0..n {
            if a == b || j[(a, b)] == 0.0 {
                continue;
            }
            let hop = &lowers[a].dagger() * &lowers[b];
            h = h + &(&hop + &hop.dagger()) * j[(a, b)];
        }
    }
    Ok(h)
}

fn spectral_radius(h: &Operator) -> f64 {
    h.matrix()
        .map(|z| z.re)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.abs()))
}

fn check_complete_positivity(config: &ReservoirConfig, w_in: &[f64]) -> Result<()> {
    if w_in.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("input weights"));
    }
    let w2: f64 = w_in.iter().map(|w| w * w).sum();
    if w2 > config.eta * config.gamma * (1.0 + 1e-12) {
        return Err(Error::field(
            "win_scale",
            format!(
                "Σ W² = {w2:.4} exceeds η γ = {:.4}; the cascaded generator would not be completely positive",
                config.eta * config.gamma
            ),
        ));
    }
    Ok(())
}

/// Draws `J` and `W_in` from the configured seed and normalizes `H_R`.
///
/// Fails when the drawn input weights would make the cascaded generator
/// non-completely-positive, i.e. when `Σ_j W_j² > η γ`.
pub fn sample_reservoir(config: &ReservoirConfig) -> Result<ReservoirInstance> {
    config.validate()?;
    let n = config.n_nodes;
    let mut rng = seed::rng(config.seed, "reservoir", 0);
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let v: f64 = rng.random_range(-1.0..=1.0);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    let w_in: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..=config.win_scale))
        .collect();

    let space = HilbertSpace::new((0..n).map(|k| ModeSpec::two_level(node_label(k))).collect())?;
    let raw = reservoir_hamiltonian(&space, &j)?;
    let radius = spectral_radius(&raw);
    if radius > 0.0 {
        j *= config.spectral_target / radius;
    }
    let hamiltonian = reservoir_hamiltonian(&space, &j)?;

    check_complete_positivity(config, &w_in)?;
    Ok(ReservoirInstance {
        config: config.clone(),
        j,
        w_in,
        space,
        hamiltonian,
        prepumped: OnceLock::new(),
    })
}

impl ReservoirInstance {
    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.config.n_nodes
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.j
    }

    /// One input weight per node for the single monitored source mode.
    pub fn input_weights(&self) -> &[f64] {
        &self.w_in
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    /// Node lowering operators on the reservoir space.
    pub fn lowering_ops(&self) -> Result<Vec<Operator>> {
        (0..self.n_nodes())
            .map(|k| mode_operator(&self.space, &node_label(k), Ladder::Lower))
            .collect()
    }

    /// Reservoir-only model: `H_R`, decay `γ` and pump `p` on every node.
    pub fn reservoir_model(&self) -> Result<LindbladModel> {
        let mut model =
            LindbladModel::new(&self.space).with_hamiltonian(self.hamiltonian.clone())?;
        for b in self.lowering_ops()? {
            model = model.add_dissipator(b.dagger(), self.config.pump)?;
            model = model.add_dissipator(b, self.config.gamma)?;
        }
        Ok(model)
    }

    /// Steady state of the pumped, decaying reservoir (computed once).
    pub fn prepump(&self) -> Result<DensityMatrix> {
        if let Some(rho) = self.prepumped.get() {
            return Ok(rho.clone());
        }
        let rho = steady_state(&self.reservoir_model()?, &self.config.integrator)?;
        Ok(self.prepumped.get_or_init(|| rho).clone())
    }

    /// Stable hex digest of the configuration and the drawn couplings.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for v in self.j.iter().chain(&self.w_in) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same couplings with the input weights replaced.
    pub fn with_input_weights(&self, w_in: Vec<f64>) -> Result<ReservoirInstance> {
        if w_in.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                found: w_in.len(),
            });
        }
        check_complete_positivity(&self.config, &w_in)?;
        Ok(ReservoirInstance {
            config: self.config.clone(),
            j: self.j.clone(),
            w_in,
            space: self.space.clone(),
            hamiltonian: self.hamiltonian.clone(),
            prepumped: OnceLock::new(),
        })
    }

    /// Same reservoir with nodes relabeled: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ReservoirInstance> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::invalid("not a permutation of the reservoir nodes"));
        }
        let j = DMatrix::from_fn(n, n, |a, b| self.j[(perm[a], perm[b])]);
        let w_in = perm.iter().map(|&p| self.w_in[p]).collect();
        let hamiltonian = reservoir_hamiltonian(&self.space, &j)?;
        Ok(ReservoirInstance {
            config: self.config.clone(),
            j,
            w_in,
            space: self.space.clone(),
            hamiltonian,
            prepumped: OnceLock::new(),
        })
    }
}
