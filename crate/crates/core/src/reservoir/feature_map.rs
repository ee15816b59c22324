//! Heisenberg-picture feature maps.
//!
//! The cascaded evolution is linear in the initial state, so each feature is
//! `Re Tr[X_jk (ρ_R ⊗ ρ_s)]` with `X_jk` the node number operator propagated
//! backwards to `t = 0`. Contracting `X_jk` with the fixed pre-pumped `ρ_R`
//! leaves one source-space matrix per feature; every source state sharing the
//! same monitored operator is then featurized by a trace.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::cascade::{cascade_model, check_occupations};
use super::ReservoirInstance;
use crate::dynamics::evolve_observable_adjoint;
use crate::error::{Error, Result};
use crate::quantum::{
    same_space, trace_product, DensityMatrix, HilbertSpace, ModeKind, Operator, C64,
};
use crate::sources::PreparedSource;

/// Fock-tail population that may be dropped when trimming a boson mode.
pub const TRIM_TOL: f64 = 1e-12;

/// A source state restricted to the modes its monitored operator acts on.
#[derive(Debug, Clone)]
pub struct SourceReduction {
    pub rho: DensityMatrix,
    pub op: Operator,
}

impl SourceReduction {
    /// Smallest truncation per boson mode that keeps all but `TRIM_TOL` of
    /// the population, plus one level so that a single raising step from a
    /// two-level partner stays inside the basis.
    pub fn needed_truncations(&self) -> Result<BTreeMap<String, usize>> {
        let mut out = BTreeMap::new();
        for m in self.rho.space().modes() {
            if let ModeKind::Boson { truncation } = m.kind {
                let pops = self.rho.mode_populations(&m.label)?;
                let mut tail = 0.0;
                let mut keep = truncation;
                for (n, p) in pops.iter().enumerate().rev() {
                    tail += p.max(0.0);
                    if tail > TRIM_TOL {
                        keep = n + 1;
                        break;
                    }
                }
                out.insert(m.label.clone(), (keep + 1).clamp(2, truncation));
            }
        }
        Ok(out)
    }

    /// Truncate boson modes to the given levels.
    pub fn trimmed(&self, truncations: &BTreeMap<String, usize>) -> Result<SourceReduction> {
        let mut rho = self.rho.clone();
        let mut op = self.op.clone();
        for (label, &t) in truncations {
            let (r, discarded) = rho.truncate_boson(label, t)?;
            if discarded > 10.0 * TRIM_TOL {
                return Err(Error::TruncationLeakage {
                    mass: discarded,
                    limit: 10.0 * TRIM_TOL,
                });
            }
            rho = r;
            op = op.truncate_boson(label, t)?;
        }
        Ok(SourceReduction { rho, op })
    }
}

/// Trace out every source mode the monitored operator does not touch.
pub fn source_reduction(source: &PreparedSource) -> Result<SourceReduction> {
    let space = source.rho.space();
    let labels: Vec<&str> = space.modes().iter().map(|m| m.label.as_str()).collect();
    let mut acting: Vec<&str> = Vec::new();
    for &l in &labels {
        let others: Vec<&str> = labels.iter().copied().filter(|&x| x != l).collect();
        if others.is_empty() || source.monitored_op.restrict_to(&others).is_err() {
            acting.push(l);
        }
    }
    if acting.len() == labels.len() {
        return Ok(SourceReduction {
            rho: source.rho.clone(),
            op: source.monitored_op.clone(),
        });
    }
    Ok(SourceReduction {
        rho: source.rho.partial_trace_keep(&acting)?,
        op: source.monitored_op.restrict_to(&acting)?,
    })
}

/// Contracted Heisenberg operators for one (reservoir, source space,
/// monitored operator) combination.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    space: Arc<HilbertSpace>,
    op: Operator,
    /// Node-major, as in the feature layout.
    blocks: Vec<DMatrix<C64>>,
}

impl FeatureMap {
    pub fn build(inst: &ReservoirInstance, op: &Operator) -> Result<FeatureMap> {
        let space = op.space().clone();
        let (model, numbers) = cascade_model(inst, &space, op)?;
        let rho_r = inst.prepump()?;
        let cfg = inst.config();
        let ds = space.dim();
        let dr = rho_r.dim();
        let per_node: Vec<Vec<DMatrix<C64>>> = numbers
            .par_iter()
            .map(|n| evolve_observable_adjoint(&model, n, &cfg.sample_times, &cfg.integrator))
            .collect::<Result<_>>()?;
        let mut blocks = Vec::with_capacity(numbers.len() * cfg.sample_times.len());
        for xs in per_node {
            for x in xs {
                let mut f = DMatrix::<C64>::zeros(ds, ds);
                for r in 0..dr {
                    for rp in 0..dr {
                        let w = rho_r.matrix()[(rp, r)];
                        if w == C64::new(0.0, 0.0) {
                            continue;
                        }
                        f += x.view((r * ds, rp * ds), (ds, ds)) * w;
                    }
                }
                blocks.push(f);
            }
        }
        Ok(FeatureMap {
            space,
            op: op.clone(),
            blocks,
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn n_features(&self) -> usize {
        self.blocks.len()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if !same_space(rho.space(), &self.space) {
            return Err(Error::SpaceMismatch);
        }
        let out: Vec<f64> = self
            .blocks
            .iter()
            .map(|f| trace_product(f, rho.matrix()).re)
            .collect();
        check_occupations(&out)?;
        Ok(out)
    }
}

fn op_key(op: &Operator) -> String {
    let mut h = Sha256::new();
    for m in op.space().modes() {
        h.update(m.label.as_bytes());
        h.update((m.dim() as u64).to_le_bytes());
    }
    for z in op.matrix().iter() {
        h.update(z.re.to_bits().to_le_bytes());
        h.update(z.im.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reservoir features for a batch of sources, in order.
///
/// Sources are reduced and trimmed to a truncation shared by all members of
/// a mode layout, then grouped by monitored operator; one feature map is
/// built per group.
pub fn reservoir_features(
    inst: &ReservoirInstance,
    sources: &[PreparedSource],
) -> Result<Vec<Vec<f64>>> {
    let reductions: Vec<SourceReduction> = sources
        .par_iter()
        .enumerate()
        .map(|(i, s)| source_reduction(s).map_err(|e| e.with_sample(i)))
        .collect::<Result<_>>()?;

    // common truncation per mode layout
    let layout = |r: &SourceReduction| -> String {
        r.rho
            .space()
            .modes()
            .iter()
            .map(|m| m.label.as_str())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut common: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (i, r) in reductions.iter().enumerate() {
        let entry = common.entry(layout(r)).or_default();
        for (label, t) in r.needed_truncations().map_err(|e| e.with_sample(i))? {
            let slot = entry.entry(label).or_insert(t);
            *slot = (*slot).max(t);
        }
    }
    let trimmed: Vec<SourceReduction> = reductions
        .par_iter()
        .enumerate()
        .map(|(i, r)| r.trimmed(&common[&layout(r)]).map_err(|e| e.with_sample(i)))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in trimmed.iter().enumerate() {
        groups.entry(op_key(&r.op)).or_default().push(i);
    }
    let mut out = vec![Vec::new(); sources.len()];
    for members in groups.values() {
        let map = FeatureMap::build(inst, &trimmed[members[0]].op)?;
        let feats: Vec<Vec<f64>> = members
            .par_iter()
            .map(|&i| map.apply(&trimmed[i].rho).map_err(|e| e.with_sample(i)))
            .collect::<Result<_>>()?;
        for (&i, f) in members.iter().zip(feats) {
            out[i] = f;
        }
    }
    Ok(out)
}
