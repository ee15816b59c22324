use serde::{Deserialize, Serialize};

use super::{check_finite, check_positive, PreparedSource, SourceSpec};
use crate::dynamics::{steady_state, IntegratorConfig, LindbladModel};
use crate::error::{Error, Result};
use crate::quantum::{
    expectation, mode_operator, second_order_coherence, HilbertSpace, Ladder, ModeSpec, Operator,
};

/// Population allowed in the top Fock level of either mode.
pub const EMITTER_TAIL_LIMIT: f64 = 1e-8;

/// Two coupled Kerr modes, both coherently driven and damped. Mode `a` is
/// monitored; `b` carries the nonlinearity. Rates and detunings are in
/// units of γ_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterCavitySpec {
    pub delta_a: f64,
    pub delta_b: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub trunc_a: usize,
    pub trunc_b: usize,
}

impl Default for EmitterCavitySpec {
    fn default() -> Self {
        EmitterCavitySpec {
            delta_a: 0.0,
            delta_b: 1.6,
            j: 1.6,
            u_a: 0.0,
            u_b: 1.0,
            omega_a: 0.1,
            omega_b: 0.07,
            gamma_a: 1.0,
            gamma_b: 0.1,
            trunc_a: 6,
            trunc_b: 6,
        }
    }
}

impl EmitterCavitySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("J", self.j),
            ("u_a", self.u_a),
            ("u_b", self.u_b),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
        ] {
            check_finite(name, v)?;
        }
        check_positive("gamma_a", self.gamma_a)?;
        if !(self.gamma_b >= 0.0) || !self.gamma_b.is_finite() {
            return Err(Error::field("gamma_b", "must be finite and ≥ 0"));
        }
        if self.trunc_a < 4 || self.trunc_b < 4 {
            return Err(Error::field("trunc_a/trunc_b", "must be ≥ 4"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<LindbladModel> {
        let space = HilbertSpace::new(vec![
            ModeSpec::boson("a", self.trunc_a),
            ModeSpec::boson("b", self.trunc_b),
        ])?;
        let a = mode_operator(&space, "a", Ladder::Annihilate)?;
        let b = mode_operator(&space, "b", Ladder::Annihilate)?;
        let (ad, bd) = (a.dagger(), b.dagger());
        let na = &ad * &a;
        let nb = &bd * &b;
        let drive = &(&a * self.omega_a) + &(&b * self.omega_b);
        let h: Operator = &na * self.delta_a
            + &nb * self.delta_b
            + &(&(&ad * &b) + &(&a * &bd)) * self.j
            + &(&(&bd * &bd) * &(&b * &b)) * (self.u_b / 2.0)
            + &(&(&ad * &ad) * &(&a * &a)) * (self.u_a / 2.0)
            + drive.clone()
            + drive.dagger();
        let mut model = LindbladModel::new(&space)
            .with_hamiltonian(h)?
            .add_dissipator(a, self.gamma_a)?;
        if self.gamma_b > 0.0 {
            model = model.add_dissipator(b, self.gamma_b)?;
        }
        Ok(model)
    }
}

pub fn build_emitter_cavity(spec: &EmitterCavitySpec) -> Result<PreparedSource> {
    spec.validate()?;
    let model = spec.model()?;
    let rho = steady_state(&model, &IntegratorConfig::default())?;
    for (label, d) in [("a", spec.trunc_a), ("b", spec.trunc_b)] {
        let top = rho.mode_populations(label)?[d - 1];
        if top > EMITTER_TAIL_LIMIT {
            return Err(Error::TruncationLeakage {
                mass: top,
                limit: EMITTER_TAIL_LIMIT,
            });
        }
    }
    let a = mode_operator(rho.space(), "a", Ladder::Annihilate)?;
    let n = expectation(&rho, &(&a.dagger() * &a))?.re;
    let g2 = second_order_coherence(&rho, &a)?;
    PreparedSource::new(rho, a, g2, n, SourceSpec::EmitterCavity(spec.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::C64;

    /// Mean field of a linear driven cavity: `⟨a⟩ = −Ω/(Δ − iγ/2)`.
    fn linear_cavity_amplitude(delta: f64, omega: f64, gamma: f64) -> C64 {
        -C64::new(omega, 0.0) / C64::new(delta, -gamma / 2.0)
    }

    #[test]
    fn linear_single_mode_is_coherent() {
        let spec = EmitterCavitySpec {
            delta_a: 0.7,
            j: 0.0,
            u_a: 0.0,
            u_b: 0.0,
            omega_b: 0.0,
            ..Default::default()
        };
        let s = build_emitter_cavity(&spec).unwrap();
        assert!((s.label_g2 - 1.0).abs() < 1e-6, "g2 = {}", s.label_g2);
        let alpha = linear_cavity_amplitude(0.7, 0.1, 1.0);
        assert!((s.label_occupation - alpha.norm_sqr()).abs() < 1e-8);
    }

    #[test]
    fn undriven_is_vacuum() {
        let spec = EmitterCavitySpec {
            omega_a: 0.0,
            omega_b: 0.0,
            ..Default::default()
        };
        let err = build_emitter_cavity(&spec).unwrap_err();
        assert!(err.to_string().contains("vacuum-dominated"), "{err}");
    }

    #[test]
    fn nonlinear_operating_point_is_valid_state() {
        let s = build_emitter_cavity(&EmitterCavitySpec::default()).unwrap();
        assert!(s.label_g2 >= 0.0 && s.label_g2.is_finite());
        assert!((s.rho.trace() - 1.0).abs() < 1e-10);
        assert!(s.rho.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn rejects_small_truncation() {
        let spec = EmitterCavitySpec {
            trunc_b: 3,
            ..Default::default()
        };
        assert!(matches!(
            build_emitter_cavity(&spec),
            Err(Error::InvalidField { .. })
        ));
    }
}
