use nalgebra::DMatrix;

use super::generator::Generator;
use super::integrator::{integrate, IntegrationStats, IntegratorConfig};
use super::model::LindbladModel;
use crate::error::{Error, Result};
use crate::quantum::{
    same_space, trace_product, DensityMatrix, Operator, C64, HERMITIAN_TOL, TRACE_TOL,
};

/// Positivity slack used at sample times when checks are enabled.
pub const EVOLUTION_PSD_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// `observable_traces[i][j] = Re Tr[O_j ρ(t_i)]`.
    pub observable_traces: Vec<Vec<f64>>,
    pub final_state: DensityMatrix,
    /// Largest `|Tr ρ − 1|` seen at the sample times.
    pub max_trace_error: f64,
    /// Largest `max|ρ − ρ†|` seen at the sample times.
    pub max_hermiticity_error: f64,
    pub stats: IntegrationStats,
}

/// `dρ/dt` at time `t`, with windows evaluated as `t1 ≤ t < t2`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityMatrix, t: f64) -> Result<DMatrix<C64>> {
    if !same_space(model.space(), rho.space()) {
        return Err(Error::SpaceMismatch);
    }
    let g = Generator::compile(
        model,
        |i| model.cascade_terms()[i].window.contains(t),
        |i| model.pulsed_dissipators()[i].window.contains(t),
    );
    let d = g.dim();
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    let mut scratch = out.clone();
    g.apply(rho.matrix().as_slice(), &mut out, &mut scratch);
    Ok(DMatrix::from_vec(d, d, out))
}

/// One generator per segment between consecutive window edges.
pub(crate) struct Segments {
    pub edges: Vec<f64>,
    pub generators: Vec<Generator>,
}

impl Segments {
    pub fn new(model: &LindbladModel, t0: f64, t_end: f64) -> Self {
        let edges: Vec<f64> = model
            .breakpoints()
            .into_iter()
            .filter(|&e| e > t0 && e < t_end)
            .collect();
        let mut generators = Vec::with_capacity(edges.len() + 1);
        for k in 0..=edges.len() {
            let a = if k == 0 { t0 } else { edges[k - 1] };
            let b = edges.get(k).copied().unwrap_or(t_end.max(a));
            // windows never straddle a segment, so the midpoint decides
            let mid = if b > a { 0.5 * (a + b) } else { a };
            generators.push(Generator::compile(
                model,
                |i| model.cascade_terms()[i].window.contains(mid),
                |i| model.pulsed_dissipators()[i].window.contains(mid),
            ));
        }
        Segments { edges, generators }
    }
}

/// Integrate the master equation from `t = 0` and record `Re Tr[O ρ(t)]` at
/// each sample time.
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    observables: &[Operator],
    cfg: &IntegratorConfig,
) -> Result<EvolutionResult> {
    if !same_space(model.space(), rho0.space()) {
        return Err(Error::SpaceMismatch);
    }
    if observables
        .iter()
        .any(|o| !same_space(model.space(), o.space()))
    {
        return Err(Error::SpaceMismatch);
    }
    if sample_times.is_empty() {
        return Err(Error::field("sample_times", "must not be empty"));
    }
    if sample_times[0] < 0.0 || sample_times.iter().any(|t| !t.is_finite()) {
        return Err(Error::field("sample_times", "must be finite and ≥ 0"));
    }
    let t_end = *sample_times.last().expect("non-empty");
    let segs = Segments::new(model, 0.0, t_end);
    let d = model.space().dim();
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut y: Vec<C64> = rho0.matrix().as_slice().to_vec();

    let mut traces = Vec::with_capacity(sample_times.len());
    let mut max_trace_error: f64 = 0.0;
    let mut max_herm: f64 = 0.0;
    let space = model.space().clone();

    let stats = integrate(
        |seg, y, dy| segs.generators[seg].apply(y, dy, &mut scratch),
        &mut y,
        0.0,
        &segs.edges,
        sample_times,
        cfg,
        |_, t, y| {
            let m = DMatrix::from_column_slice(d, d, y);
            let rho = DensityMatrix::from_matrix_unchecked(space.clone(), m);
            let tr_err = (rho.trace() - 1.0).abs();
            let herm = rho.hermiticity_error();
            max_trace_error = max_trace_error.max(tr_err);
            max_herm = max_herm.max(herm);
            if tr_err > TRACE_TOL {
                return Err(Error::InvariantViolation(format!(
                    "trace drifted by {tr_err:e} at t = {t}"
                )));
            }
            if herm > HERMITIAN_TOL {
                return Err(Error::InvariantViolation(format!(
                    "Hermiticity lost ({herm:e}) at t = {t}"
                )));
            }
            if cfg.check_positivity {
                let min = rho.min_eigenvalue();
                if min < -EVOLUTION_PSD_TOL {
                    return Err(Error::InvariantViolation(format!(
                        "negative eigenvalue {min:e} at t = {t}"
                    )));
                }
            }
            traces.push(
                observables
                    .iter()
                    .map(|o| trace_product(o.matrix(), rho.matrix()).re)
                    .collect(),
            );
            Ok(())
        },
    )?;

    let final_state =
        DensityMatrix::from_matrix_unchecked(model.space().clone(), DMatrix::from_vec(d, d, y));
    Ok(EvolutionResult {
        times: sample_times.to_vec(),
        observable_traces: traces,
        final_state,
        max_trace_error,
        max_hermiticity_error: max_herm,
        stats,
    })
}

/// Heisenberg-picture propagation: returns `X_i = Φ†(t_i, 0)(O)` for every
/// sample time, so that `Tr[O ρ(t_i)] = Tr[X_i ρ(0)]` for any initial state.
pub fn evolve_observable_adjoint(
    model: &LindbladModel,
    observable: &Operator,
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<DMatrix<C64>>> {
    if !same_space(model.space(), observable.space()) {
        return Err(Error::SpaceMismatch);
    }
    if sample_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::field("sample_times", "must be finite and ≥ 0"));
    }
    if sample_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::field("sample_times", "must be strictly increasing"));
    }
    let Some(&t_end) = sample_times.last() else {
        return Ok(Vec::new());
    };
    let segs = Segments::new(model, 0.0, t_end);
    let d = model.space().dim();
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut out = Vec::with_capacity(sample_times.len());

    for &t in sample_times {
        // Segments in [0, t], newest first; τ runs backwards from t to 0.
        let mut bounds = vec![0.0];
        bounds.extend(segs.edges.iter().copied().filter(|&e| e < t));
        bounds.push(t);
        let mut x: Vec<C64> = observable.matrix().as_slice().to_vec();
        for k in (0..bounds.len() - 1).rev() {
            let len = bounds[k + 1] - bounds[k];
            if len <= 0.0 {
                continue;
            }
            let g = &segs.generators[k];
            integrate(
                |_, y, dy| g.apply_adjoint(y, dy, &mut scratch),
                &mut x,
                0.0,
                &[],
                &[len],
                cfg,
                |_, _, _| Ok(()),
            )?;
        }
        out.push(DMatrix::from_vec(d, d, x));
    }
    Ok(out)
}
