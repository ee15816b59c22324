//! The four source families: state preparation plus ground-truth g²(0).

mod coherent_tls;
mod cv_mixture;
mod emitter_cavity;
mod photon_added;
mod registry;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, Operator};

pub use coherent_tls::{beam_splitter_outputs, build_coherent_tls_mix, CoherentTlsMixSpec};
pub use cv_mixture::{build_cv_mixture, cv_mixture_g2_analytic, CvMixtureSpec};
pub use emitter_cavity::{build_emitter_cavity, EmitterCavitySpec, EMITTER_TAIL_LIMIT};
pub use photon_added::{
    build_photon_added, legendre_p, photon_added_g1_explicit, photon_added_g2_analytic,
    photon_added_norm_sq, PhotonAddedSpec, SQUEEZE_LEAKAGE_LIMIT,
};
pub use registry::{ParamMap, SourceFamily, SourceRegistry};
pub use sweep::{
    sweep_source, Axis, AxisPoints, SweepFailure, SweepOutcome, SweepSpec, SweptSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceId {
    #[serde(rename = "3b-mix")]
    ThreeBMix,
    #[serde(rename = "em-in-cav")]
    EmInCav,
    #[serde(rename = "ph-added")]
    PhAdded,
    #[serde(rename = "coh-2ls-mix")]
    Coh2LsMix,
}

impl SourceId {
    pub const ALL: [SourceId; 4] = [
        SourceId::ThreeBMix,
        SourceId::EmInCav,
        SourceId::PhAdded,
        SourceId::Coh2LsMix,
    ];

    /// File-name friendly identifier.
    pub fn slug(self) -> &'static str {
        match self {
            SourceId::ThreeBMix => "3b-mix",
            SourceId::EmInCav => "em-in-cav",
            SourceId::PhAdded => "ph-added",
            SourceId::Coh2LsMix => "coh-2ls-mix",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            SourceId::ThreeBMix => "3B-Mix",
            SourceId::EmInCav => "Em-in-Cav",
            SourceId::PhAdded => "Ph-Added",
            SourceId::Coh2LsMix => "Coh-2LS-Mix",
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for SourceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceId::ALL
            .into_iter()
            .find(|id| {
                id.slug().eq_ignore_ascii_case(s) || id.display_name().eq_ignore_ascii_case(s)
            })
            .ok_or_else(|| Error::UnknownName {
                kind: "source family",
                name: s.to_string(),
            })
    }
}

/// Tagged description of one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceSpec {
    CvMixture(CvMixtureSpec),
    EmitterCavity(EmitterCavitySpec),
    PhotonAdded(PhotonAddedSpec),
    CoherentTlsMix(CoherentTlsMixSpec),
}

impl SourceSpec {
    pub fn id(&self) -> SourceId {
        match self {
            SourceSpec::CvMixture(_) => SourceId::ThreeBMix,
            SourceSpec::EmitterCavity(_) => SourceId::EmInCav,
            SourceSpec::PhotonAdded(_) => SourceId::PhAdded,
            SourceSpec::CoherentTlsMix(_) => SourceId::Coh2LsMix,
        }
    }

    pub fn build(&self) -> Result<PreparedSource> {
        match self {
            SourceSpec::CvMixture(s) => build_cv_mixture(s),
            SourceSpec::EmitterCavity(s) => build_emitter_cavity(s),
            SourceSpec::PhotonAdded(s) => build_photon_added(s),
            SourceSpec::CoherentTlsMix(s) => build_coherent_tls_mix(s),
        }
    }
}

/// A prepared source state together with its labels.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub rho: DensityMatrix,
    /// The field whose g²(0) is the label; it is also the operator that
    /// couples into the reservoir.
    pub monitored_op: Operator,
    pub label_g2: f64,
    pub label_occupation: f64,
    pub source_id: SourceId,
    pub spec: SourceSpec,
}

impl PreparedSource {
    pub(crate) fn new(
        rho: DensityMatrix,
        monitored_op: Operator,
        label_g2: f64,
        label_occupation: f64,
        spec: SourceSpec,
    ) -> Result<Self> {
        if !label_g2.is_finite() || label_g2 < -1e-12 {
            return Err(Error::InvariantViolation(format!(
                "g² label {label_g2} is negative"
            )));
        }
        if !(label_occupation > 0.0) {
            return Err(Error::VacuumDominated {
                occupation: label_occupation,
            });
        }
        Ok(PreparedSource {
            rho,
            monitored_op,
            label_g2: label_g2.max(0.0),
            label_occupation,
            source_id: spec.id(),
            spec,
        })
    }
}

pub(crate) fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::field(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

pub(crate) fn check_finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::field(field, "must be finite"))
    }
}
