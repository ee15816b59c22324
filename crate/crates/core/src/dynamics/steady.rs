use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;

use super::evolve::lindblad_rhs;
use super::generator::Generator;
use super::integrator::{integrate, IntegratorConfig};
use super::model::LindbladModel;
use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, C64};

/// Spaces larger than this are relaxed by time evolution instead of a direct solve.
pub const DIRECT_SOLVE_MAX_DIM: usize = 150;
/// Required bound on `‖L(ρ)‖_F` for the returned state.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Stationary state of an autonomous model.
pub fn steady_state(model: &LindbladModel, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    if !model.is_autonomous() {
        return Err(Error::invalid(
            "steady state requested for a model with time-windowed terms",
        ));
    }
    let rho = if model.space().dim() <= DIRECT_SOLVE_MAX_DIM {
        direct_solve(model)?
    } else {
        relax(model, cfg)?
    };
    let residual = lindblad_rhs(model, &rho, 0.0)?.norm();
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        return Err(Error::SteadyState(format!(
            "residual ‖L(ρ)‖ = {residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    rho.validate(crate::quantum::PSD_TOL)?;
    Ok(rho)
}

/// Solve `L vec(ρ) = 0` with the first equation replaced by `Tr ρ = 1`.
/// The replaced row is redundant because `L` is trace-preserving.
fn direct_solve(model: &LindbladModel) -> Result<DensityMatrix> {
    let d = model.space().dim();
    let n = d * d;
    let g = Generator::compile(model, |_| false, |_| false);
    let mut trip: Vec<Triplet<usize, usize, C64>> = g
        .liouvillian_triplets()
        .into_iter()
        .filter(|&(r, _, _)| r != 0)
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    for i in 0..d {
        trip.push(Triplet::new(0, i + i * d, C64::new(1.0, 0.0)));
    }
    let m = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SteadyState(format!("assembling the Liouvillian: {e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::SteadyState(format!("LU factorization: {e:?}")))?;
    let mut rhs = Mat::<C64>::zeros(n, 1);
    rhs[(0, 0)] = C64::new(1.0, 0.0);
    let x = lu.solve(&rhs);

    let mut rho = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            rho[(i, j)] = x[(i + j * d, 0)];
        }
    }
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonUniqueSteadyState);
    }
    // a singular reduced system shows up as a huge, non-physical solution
    if rho.norm() > 1.0 + 1e-6 {
        return Err(Error::NonUniqueSteadyState);
    }
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(
        model.space().clone(),
        rho,
    ))
}

/// Evolve from the vacuum until `‖dρ/dt‖_F < 1e-9`.
fn relax(model: &LindbladModel, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    let d = model.space().dim();
    let g = Generator::compile(model, |_| false, |_| false);
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut dy = scratch.clone();
    let mut y = vec![C64::new(0.0, 0.0); d * d];
    y[0] = C64::new(1.0, 0.0);
    // Near the fixed point the step size runs into the stability limit and
    // controller noise sets a floor on ‖dρ/dt‖ proportional to the tolerance.
    let cfg = IntegratorConfig {
        rel_tol: cfg.rel_tol.min(1e-12),
        abs_tol: cfg.abs_tol.min(1e-14),
        fixed_step: None,
        ..cfg.clone()
    };
    let mut chunk = 1.0;
    let mut elapsed = 0.0;
    const HORIZON: f64 = 1e6;
    loop {
        integrate(
            |_, y, dy| g.apply(y, dy, &mut scratch),
            &mut y,
            0.0,
            &[],
            &[chunk],
            &cfg,
            |_, _, _| Ok(()),
        )?;
        elapsed += chunk;
        g.apply(&y, &mut dy, &mut scratch);
        let rate = dy.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rate < 1e-9 {
            break;
        }
        if elapsed > HORIZON {
            return Err(Error::SteadyState(format!(
                "no convergence after t = {elapsed} (‖dρ/dt‖ = {rate:e})"
            )));
        }
        chunk = (chunk * 2.0).min(100.0);
    }
    let rho = DMatrix::from_vec(d, d, y);
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(
        model.space().clone(),
        rho,
    ))
}
