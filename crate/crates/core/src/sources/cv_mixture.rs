use serde::{Deserialize, Serialize};

use super::{check_finite, PreparedSource, SourceSpec};
use crate::error::{Error, Result};
use crate::quantum::{mode_operator, DensityMatrix, Ladder, C64};

/// Fock / coherent / thermal mixture with weights on the unit sphere:
/// `p₁ = cos²θ`, `p₂ = sin²θ cos²φ`, `p₃ = sin²θ sin²φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvMixtureSpec {
    pub theta: f64,
    pub phi: f64,
    pub fock_n: usize,
    pub alpha: C64,
    pub nbar: f64,
    pub truncation: usize,
}

impl Default for CvMixtureSpec {
    fn default() -> Self {
        CvMixtureSpec {
            theta: std::f64::consts::FRAC_PI_4,
            phi: std::f64::consts::FRAC_PI_4,
            fock_n: 1,
            alpha: C64::new(1.0, 0.0),
            nbar: 0.5,
            truncation: 30,
        }
    }
}

impl CvMixtureSpec {
    pub fn weights(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [ct * ct, st * st * cp * cp, st * st * sp * sp]
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("theta", self.theta)?;
        check_finite("phi", self.phi)?;
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::field("theta", "must lie in [0, π]"));
        }
        if !(0.0..=2.0 * std::f64::consts::PI).contains(&self.phi) {
            return Err(Error::field("phi", "must lie in [0, 2π]"));
        }
        if !(self.nbar >= 0.0) || !self.nbar.is_finite() {
            return Err(Error::field("nbar", "must be finite and ≥ 0"));
        }
        check_finite("alpha", self.alpha.re + self.alpha.im)?;
        if self.truncation < 2 || self.fock_n >= self.truncation {
            return Err(Error::field(
                "truncation",
                "must be ≥ 2 and exceed the Fock level",
            ));
        }
        let sum: f64 = self.weights().iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "mixture weights sum to {sum}"
            )));
        }
        Ok(())
    }
}

/// Closed-form g²(0) of the mixture.
pub fn cv_mixture_g2_analytic(spec: &CvMixtureSpec) -> Result<f64> {
    let [p1, p2, p3] = spec.weights();
    let n = spec.fock_n as f64;
    let a2 = spec.alpha.norm_sqr();
    let num = p1 * n * (n - 1.0) + p2 * a2 * a2 + 2.0 * p3 * spec.nbar * spec.nbar;
    let den = p1 * n + p2 * a2 + p3 * spec.nbar;
    if den <= 1e-12 {
        return Err(Error::VacuumDominated { occupation: den });
    }
    Ok(num / (den * den))
}

pub fn build_cv_mixture(spec: &CvMixtureSpec) -> Result<PreparedSource> {
    spec.validate()?;
    let d = spec.truncation;
    let [p1, p2, p3] = spec.weights();
    let fock = DensityMatrix::fock("a", d, spec.fock_n)?;
    let mut parts = vec![(p1, &fock)];
    // components with zero weight are skipped so they cannot trip leakage checks
    let coherent;
    if p2 > 0.0 {
        coherent = DensityMatrix::coherent("a", d, spec.alpha)?;
        parts.push((p2, &coherent));
    }
    let thermal;
    if p3 > 0.0 {
        thermal = DensityMatrix::thermal("a", d, spec.nbar)?;
        parts.push((p3, &thermal));
    }
    let rho = DensityMatrix::mixture(&parts)?;
    let a = mode_operator(rho.space(), "a", Ladder::Annihilate)?;
    let g2 = cv_mixture_g2_analytic(spec)?;
    let occupation = p1 * spec.fock_n as f64 + p2 * spec.alpha.norm_sqr() + p3 * spec.nbar;
    PreparedSource::new(rho, a, g2, occupation, SourceSpec::CvMixture(spec.clone()))
}
