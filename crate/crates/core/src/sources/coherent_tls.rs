use serde::{Deserialize, Serialize};

use super::{check_finite, check_positive, PreparedSource, SourceSpec};
use crate::dynamics::{steady_state, IntegratorConfig, LindbladModel};
use crate::error::{Error, Result};
use crate::quantum::{
    expectation, mode_operator, second_order_coherence, DensityMatrix, HilbertSpace, Ladder,
    ModeSpec, Operator, Tensor, C64,
};

/// Population allowed in the top Fock level of the coherent mode.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-8;

/// A driven cavity and a driven two-level emitter mixed on a beam splitter
/// with `R = sin θ`, `T = cos θ`. The monitored output is `o₂ = Tσ + iRa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherentTlsMixSpec {
    pub delta_a: f64,
    pub omega_a: f64,
    pub gamma_a: f64,
    pub delta_sigma: f64,
    pub omega_sigma: f64,
    pub gamma_sigma: f64,
    pub bs_theta: f64,
    pub truncation: usize,
}

impl Default for CoherentTlsMixSpec {
    fn default() -> Self {
        CoherentTlsMixSpec {
            delta_a: 0.0,
            omega_a: 0.3,
            gamma_a: 1.0,
            delta_sigma: 0.0,
            omega_sigma: 0.3,
            gamma_sigma: 1.0,
            bs_theta: std::f64::consts::FRAC_PI_4,
            truncation: 30,
        }
    }
}

impl CoherentTlsMixSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_a", self.delta_a),
            ("omega_a", self.omega_a),
            ("delta_sigma", self.delta_sigma),
            ("omega_sigma", self.omega_sigma),
            ("bs_theta", self.bs_theta),
        ] {
            check_finite(name, v)?;
        }
        check_positive("gamma_a", self.gamma_a)?;
        check_positive("gamma_sigma", self.gamma_sigma)?;
        if self.truncation < 2 {
            return Err(Error::field("truncation", "must be ≥ 2"));
        }
        Ok(())
    }

    /// `(R, T)`.
    pub fn mixing(&self) -> (f64, f64) {
        self.bs_theta.sin_cos()
    }
}

/// Both beam-splitter outputs, `(o₁, o₂)`, on the `a ⊗ σ` space.
pub fn beam_splitter_outputs(
    space: &std::sync::Arc<HilbertSpace>,
    theta: f64,
) -> Result<(Operator, Operator)> {
    let (r, t) = theta.sin_cos();
    let a = mode_operator(space, "a", Ladder::Annihilate)?;
    let s = mode_operator(space, "sigma", Ladder::Lower)?;
    let i = C64::i();
    let o1 = &(&a * t) + &(&s * (i * r));
    let o2 = &(&a * (i * r)) + &(&s * t);
    Ok((o1, o2))
}

fn cavity_steady_state(spec: &CoherentTlsMixSpec) -> Result<DensityMatrix> {
    let space = HilbertSpace::single(ModeSpec::boson("a", spec.truncation))?;
    let a = mode_operator(&space, "a", Ladder::Annihilate)?;
    let h = &(&a.dagger() * &a) * spec.delta_a + &(&a + &a.dagger()) * spec.omega_a;
    let model = LindbladModel::new(&space)
        .with_hamiltonian(h)?
        .add_dissipator(a, spec.gamma_a)?;
    let rho = steady_state(&model, &IntegratorConfig::default())?;
    let top = rho.mode_populations("a")?[spec.truncation - 1];
    if top > COHERENT_TAIL_LIMIT {
        return Err(Error::TruncationLeakage {
            mass: top,
            limit: COHERENT_TAIL_LIMIT,
        });
    }
    Ok(rho)
}

fn emitter_steady_state(spec: &CoherentTlsMixSpec) -> Result<DensityMatrix> {
    let space = HilbertSpace::single(ModeSpec::two_level("sigma"))?;
    let s = mode_operator(&space, "sigma", Ladder::Lower)?;
    let h = &(&s.dagger() * &s) * spec.delta_sigma + &(&s + &s.dagger()) * spec.omega_sigma;
    let model = LindbladModel::new(&space)
        .with_hamiltonian(h)?
        .add_dissipator(s, spec.gamma_sigma)?;
    steady_state(&model, &IntegratorConfig::default())
}

pub fn build_coherent_tls_mix(spec: &CoherentTlsMixSpec) -> Result<PreparedSource> {
    spec.validate()?;
    let rho = cavity_steady_state(spec)?.tensor(&emitter_steady_state(spec)?)?;
    let (_, o2) = beam_splitter_outputs(rho.space(), spec.bs_theta)?;
    let n = expectation(&rho, &(&o2.dagger() * &o2))?.re;
    let g2 = second_order_coherence(&rho, &o2)?;
    PreparedSource::new(rho, o2, g2, n, SourceSpec::CoherentTlsMix(spec.clone()))
}
