//! Lindblad master-equation integration and steady states.

mod evolve;
pub(crate) mod generator;
mod integrator;
mod model;
mod steady;

pub use evolve::{
    evolve, evolve_observable_adjoint, lindblad_rhs, EvolutionResult, EVOLUTION_PSD_TOL,
};
pub use integrator::{integrate, IntegrationStats, IntegratorConfig};
pub use model::{CascadeTerm, Dissipator, LindbladModel, PulsedDissipator, Window};
pub use steady::{steady_state, DIRECT_SOLVE_MAX_DIM, RESIDUAL_TOL};
