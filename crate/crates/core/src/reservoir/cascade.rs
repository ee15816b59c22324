use std::sync::Arc;

use super::ReservoirInstance;
use crate::dynamics::{evolve, EvolutionResult, LindbladModel};
use crate::error::{Error, Result};
use crate::quantum::{expectation, HilbertSpace, Operator, Tensor};
use crate::sources::PreparedSource;

/// Joint reservoir ⊗ source model, plus the node number operators on the
/// joint space. The reservoir modes come first.
///
/// `s` is the monitored source operator on `source_space`. During the
/// window it drives every node with weight `W_j` and decays at rate `η`.
/// The source has no Hamiltonian of its own here.
pub fn cascade_model(
    inst: &ReservoirInstance,
    source_space: &Arc<HilbertSpace>,
    s: &Operator,
) -> Result<(LindbladModel, Vec<Operator>)> {
    let joint = inst.space().compose(source_space)?;
    let id_r = Operator::identity(inst.space());
    let id_s = Operator::identity(source_space);
    let lift_r = |op: &Operator| op.tensor(&id_s);
    let cfg = inst.config();

    let s_joint = id_r.tensor(s)?;
    let mut model = LindbladModel::new(&joint).with_hamiltonian(lift_r(inst.hamiltonian())?)?;
    let mut numbers = Vec::with_capacity(inst.n_nodes());
    for (b, &w) in inst.lowering_ops()?.iter().zip(inst.input_weights()) {
        let b = lift_r(b)?;
        numbers.push(&b.dagger() * &b);
        model = model
            .add_dissipator(b.dagger(), cfg.pump)?
            .add_dissipator(b.clone(), cfg.gamma)?;
        if w != 0.0 {
            model = model.add_cascade(s_joint.clone(), b, w, cfg.window)?;
        }
    }
    if cfg.eta > 0.0 {
        model = model.add_pulsed_dissipator(s_joint, cfg.eta, cfg.window)?;
    }
    Ok((model, numbers))
}

/// Integrates the joint state from `ρ_R ⊗ ρ_s`, recording the node
/// occupations at the sample times.
pub fn cascade_evolution(
    inst: &ReservoirInstance,
    source: &PreparedSource,
) -> Result<EvolutionResult> {
    let (model, numbers) = cascade_model(inst, source.rho.space(), &source.monitored_op)?;
    let rho0 = inst.prepump()?.tensor(&source.rho)?;
    let cfg = inst.config();
    evolve(&model, &rho0, &cfg.sample_times, &numbers, &cfg.integrator)
}

/// Direct Schrödinger-picture run on the full source state.
/// Features are node-major: entry `j·T + k` is `⟨b_j†b_j⟩(t_k)`.
pub fn run_cascade(inst: &ReservoirInstance, source: &PreparedSource) -> Result<Vec<f64>> {
    let res = cascade_evolution(inst, source)?;
    let n_t = inst.config().sample_times.len();
    let mut out = vec![0.0; inst.n_nodes() * n_t];
    for (k, row) in res.observable_traces.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j * n_t + k] = *v;
        }
    }
    check_occupations(&out)?;
    Ok(out)
}

pub(crate) fn check_occupations(values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite("reservoir features"));
        }
        if !(-1e-7..=1.0 + 1e-7).contains(&v) {
            return Err(Error::InvariantViolation(format!(
                "node occupation {v} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Source-only features: the occupation of the monitored mode.
pub fn baseline_features(source: &PreparedSource) -> Result<Vec<f64>> {
    let op = &source.monitored_op.dagger() * &source.monitored_op;
    Ok(vec![expectation(&source.rho, &op)?.re])
}
