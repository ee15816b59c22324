use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{PreparedSource, SourceSpec};
use crate::error::{Error, Result};
use crate::quantum::{mode_operator, DensityMatrix, HilbertSpace, Ladder, ModeSpec};

/// `N a†^m S(r)|0⟩` with `S(r) = exp(r a²/2 − r a†²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonAddedSpec {
    pub r: f64,
    pub m: usize,
    pub truncation: usize,
}

impl Default for PhotonAddedSpec {
    fn default() -> Self {
        PhotonAddedSpec {
            r: 0.5,
            m: 1,
            truncation: 60,
        }
    }
}

/// Number of top Fock levels whose population counts as leakage.
const EDGE_LEVELS: usize = 5;

/// Leakage bound for squeezed states. The truncated exponential loses
/// accuracy near the top of the basis; at this bound the g² error stays
/// near 1e-6.
pub const SQUEEZE_LEAKAGE_LIMIT: f64 = 1e-6;

impl PhotonAddedSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() || self.r < 0.0 {
            return Err(Error::field("r", "must be finite and ≥ 0"));
        }
        if self.truncation < self.m + 2 {
            return Err(Error::field(
                "truncation",
                format!("must be at least m + 2 = {}", self.m + 2),
            ));
        }
        Ok(())
    }
}

/// Legendre polynomial `P_m(x)` by the three-term recurrence.
pub fn legendre_p(m: usize, x: f64) -> f64 {
    let (mut p_prev, mut p) = (1.0, x);
    if m == 0 {
        return 1.0;
    }
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// `1/N² = m! coshᵐ r P_m(cosh r)`, the squared norm of `a†^m S(r)|0⟩`.
pub fn photon_added_norm_sq(r: f64, m: usize) -> f64 {
    let xi = r.cosh();
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    fact * xi.powi(m as i32) * legendre_p(m, xi)
}

/// Closed-form g²(0) of the m-photon-added squeezed vacuum.
pub fn photon_added_g2_analytic(r: f64, m: usize) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::field("r", "must be finite and ≥ 0"));
    }
    if m == 0 && r == 0.0 {
        return Err(Error::VacuumDominated { occupation: 0.0 });
    }
    let xi = r.cosh();
    let pm = legendre_p(m, xi);
    let q1 = legendre_p(m + 1, xi) / pm;
    let q2 = legendre_p(m + 2, xi) / pm;
    let mf = m as f64;
    let num = (mf + 1.0) * xi * ((mf + 2.0) * xi * q2 - 4.0 * q1) + 2.0;
    let den = ((mf + 1.0) * xi * q1 - 1.0).powi(2);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("photon-added g²"));
    }
    Ok(num / den)
}

/// The explicit single-photon-added expression, kept separate from the
/// general formula so the two can be checked against each other.
pub fn photon_added_g1_explicit(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::field("r", "must be finite and > 0"));
    }
    let t = r.tanh();
    let den = (1.0 / t - t) * (3.0 * r.cosh().powi(2) - 2.0);
    Ok(3.0 * (3.0 + 2.0 * t * t) / (den * den))
}

pub fn build_photon_added(spec: &PhotonAddedSpec) -> Result<PreparedSource> {
    spec.validate()?;
    let d = spec.truncation;
    let space = HilbertSpace::single(ModeSpec::boson("a", d))?;
    let a = mode_operator(&space, "a", Ladder::Annihilate)?;
    let ad = a.dagger();
    let gen = &(&(&a * &a) - &(&ad * &ad)) * (spec.r / 2.0);
    let squeeze = crate::quantum::matrix_exp(&gen)?;
    let mut psi: DVector<_> = squeeze.matrix().column(0).into_owned();
    for _ in 0..spec.m {
        psi = ad.matrix() * psi;
    }
    let norm_sq = psi.norm_squared();
    if norm_sq <= 1e-12 {
        return Err(Error::AnnihilatedState {
            norm: norm_sq.sqrt(),
        });
    }
    // mass lost off the top of the basis, plus mass sitting at the edge
    let lost = (1.0 - norm_sq / photon_added_norm_sq(spec.r, spec.m)).abs();
    let edge: f64 = psi
        .iter()
        .skip(d.saturating_sub(EDGE_LEVELS))
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        / norm_sq;
    let leakage = lost.max(edge);
    if leakage > SQUEEZE_LEAKAGE_LIMIT {
        return Err(Error::TruncationLeakage {
            mass: leakage,
            limit: SQUEEZE_LEAKAGE_LIMIT,
        });
    }
    let rho = DensityMatrix::pure(space, &psi)?;
    let g2 = photon_added_g2_analytic(spec.r, spec.m)?;
    let n = crate::quantum::expectation(&rho, &(&ad * &a))?.re;
    PreparedSource::new(rho, a, g2, n, SourceSpec::PhotonAdded(spec.clone()))
}
