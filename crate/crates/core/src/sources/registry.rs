use std::collections::BTreeMap;

use super::{
    CoherentTlsMixSpec, CvMixtureSpec, EmitterCavitySpec, PhotonAddedSpec, PreparedSource,
    SourceId, SourceSpec,
};
use crate::error::{Error, Result};

/// Flat parameter assignment, keyed by parameter name.
pub type ParamMap = BTreeMap<String, f64>;

/// A source family addressable by name, built from flat parameters.
pub trait SourceFamily: Send + Sync {
    fn id(&self) -> SourceId;

    fn name(&self) -> &'static str {
        self.id().slug()
    }

    fn param_names(&self) -> &'static [&'static str];

    fn default_params(&self) -> ParamMap;

    /// Defaults overlaid with `params`. Unknown names are rejected.
    fn spec_from_params(&self, params: &ParamMap) -> Result<SourceSpec>;

    fn build(&self, params: &ParamMap) -> Result<PreparedSource> {
        self.spec_from_params(params)?.build()
    }
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::field(
            name,
            format!("must be a non-negative integer, got {v}"),
        ))
    }
}

fn unknown(family: &dyn SourceFamily, name: &str) -> Error {
    Error::UnknownName {
        kind: "source parameter",
        name: format!(
            "{name} (family {}; known: {})",
            family.name(),
            family.param_names().join(", ")
        ),
    }
}

fn params(pairs: &[(&str, f64)]) -> ParamMap {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub struct CvMixtureFamily;

impl SourceFamily for CvMixtureFamily {
    fn id(&self) -> SourceId {
        SourceId::ThreeBMix
    }

    fn param_names(&self) -> &'static [&'static str] {
        &[
            "theta",
            "phi",
            "fock_n",
            "alpha_re",
            "alpha_im",
            "nbar",
            "truncation",
        ]
    }

    fn default_params(&self) -> ParamMap {
        let s = CvMixtureSpec::default();
        params(&[
            ("theta", s.theta),
            ("phi", s.phi),
            ("fock_n", s.fock_n as f64),
            ("alpha_re", s.alpha.re),
            ("alpha_im", s.alpha.im),
            ("nbar", s.nbar),
            ("truncation", s.truncation as f64),
        ])
    }

    fn spec_from_params(&self, params: &ParamMap) -> Result<SourceSpec> {
        let mut s = CvMixtureSpec::default();
        for (k, &v) in params {
            match k.as_str() {
                "theta" => s.theta = v,
                "phi" => s.phi = v,
                "fock_n" => s.fock_n = as_count(k, v)?,
                "alpha_re" => s.alpha.re = v,
                "alpha_im" => s.alpha.im = v,
                "nbar" => s.nbar = v,
                "truncation" => s.truncation = as_count(k, v)?,
                _ => return Err(unknown(self, k)),
            }
        }
        Ok(SourceSpec::CvMixture(s))
    }
}

pub struct EmitterCavityFamily;

impl SourceFamily for EmitterCavityFamily {
    fn id(&self) -> SourceId {
        SourceId::EmInCav
    }

    fn param_names(&self) -> &'static [&'static str] {
        &[
            "delta_a", "delta_b", "J", "u_a", "u_b", "omega_a", "omega_b", "gamma_a", "gamma_b",
            "trunc_a", "trunc_b",
        ]
    }

    fn default_params(&self) -> ParamMap {
        let s = EmitterCavitySpec::default();
        params(&[
            ("delta_a", s.delta_a),
            ("delta_b", s.delta_b),
            ("J", s.j),
            ("u_a", s.u_a),
            ("u_b", s.u_b),
            ("omega_a", s.omega_a),
            ("omega_b", s.omega_b),
            ("gamma_a", s.gamma_a),
            ("gamma_b", s.gamma_b),
            ("trunc_a", s.trunc_a as f64),
            ("trunc_b", s.trunc_b as f64),
        ])
    }

    fn spec_from_params(&self, params: &ParamMap) -> Result<SourceSpec> {
        let mut s = EmitterCavitySpec::default();
        for (k, &v) in params {
            match k.as_str() {
                "delta_a" => s.delta_a = v,
                "delta_b" => s.delta_b = v,
                "J" => s.j = v,
                "u_a" => s.u_a = v,
                "u_b" => s.u_b = v,
                "omega_a" => s.omega_a = v,
                "omega_b" => s.omega_b = v,
                "gamma_a" => s.gamma_a = v,
                "gamma_b" => s.gamma_b = v,
                "trunc_a" => s.trunc_a = as_count(k, v)?,
                "trunc_b" => s.trunc_b = as_count(k, v)?,
                _ => return Err(unknown(self, k)),
            }
        }
        Ok(SourceSpec::EmitterCavity(s))
    }
}

pub struct PhotonAddedFamily;

impl SourceFamily for PhotonAddedFamily {
    fn id(&self) -> SourceId {
        SourceId::PhAdded
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["r", "m", "truncation"]
    }

    fn default_params(&self) -> ParamMap {
        let s = PhotonAddedSpec::default();
        params(&[
            ("r", s.r),
            ("m", s.m as f64),
            ("truncation", s.truncation as f64),
        ])
    }

    fn spec_from_params(&self, params: &ParamMap) -> Result<SourceSpec> {
        let mut s = PhotonAddedSpec::default();
        for (k, &v) in params {
            match k.as_str() {
                "r" => s.r = v,
                "m" => s.m = as_count(k, v)?,
                "truncation" => s.truncation = as_count(k, v)?,
                _ => return Err(unknown(self, k)),
            }
        }
        Ok(SourceSpec::PhotonAdded(s))
    }
}

pub struct CoherentTlsMixFamily;

impl SourceFamily for CoherentTlsMixFamily {
    fn id(&self) -> SourceId {
        SourceId::Coh2LsMix
    }

    fn param_names(&self) -> &'static [&'static str] {
        &[
            "delta_a",
            "omega_a",
            "gamma_a",
            "delta_sigma",
            "omega_sigma",
            "gamma_sigma",
            "bs_theta",
            "truncation",
        ]
    }

    fn default_params(&self) -> ParamMap {
        let s = CoherentTlsMixSpec::default();
        params(&[
            ("delta_a", s.delta_a),
            ("omega_a", s.omega_a),
            ("gamma_a", s.gamma_a),
            ("delta_sigma", s.delta_sigma),
            ("omega_sigma", s.omega_sigma),
            ("gamma_sigma", s.gamma_sigma),
            ("bs_theta", s.bs_theta),
            ("truncation", s.truncation as f64),
        ])
    }

    fn spec_from_params(&self, params: &ParamMap) -> Result<SourceSpec> {
        let mut s = CoherentTlsMixSpec::default();
        for (k, &v) in params {
            match k.as_str() {
                "delta_a" => s.delta_a = v,
                "omega_a" => s.omega_a = v,
                "gamma_a" => s.gamma_a = v,
                "delta_sigma" => s.delta_sigma = v,
                "omega_sigma" => s.omega_sigma = v,
                "gamma_sigma" => s.gamma_sigma = v,
                "bs_theta" => s.bs_theta = v,
                "truncation" => s.truncation = as_count(k, v)?,
                _ => return Err(unknown(self, k)),
            }
        }
        Ok(SourceSpec::CoherentTlsMix(s))
    }
}

/// Name-keyed collection of source families.
pub struct SourceRegistry {
    families: BTreeMap<String, Box<dyn SourceFamily>>,
}

impl SourceRegistry {
    pub fn empty() -> Self {
        SourceRegistry {
            families: BTreeMap::new(),
        }
    }

    /// Registry holding the four built-in families.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(CvMixtureFamily));
        r.register(Box::new(EmitterCavityFamily));
        r.register(Box::new(PhotonAddedFamily));
        r.register(Box::new(CoherentTlsMixFamily));
        r
    }

    pub fn register(&mut self, family: Box<dyn SourceFamily>) {
        self.families.insert(family.name().to_string(), family);
    }

    /// Accepts either the slug or the display name of a built-in id.
    pub fn get(&self, name: &str) -> Result<&dyn SourceFamily> {
        let key = match name.parse::<SourceId>() {
            Ok(id) => id.slug().to_string(),
            Err(_) => name.to_string(),
        };
        self.families
            .get(&key)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "source family",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.families.keys().map(String::as_str).collect()
    }
}

impl Default for SourceRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_to_default_specs() {
        let reg = SourceRegistry::with_builtin();
        assert_eq!(reg.names().len(), 4);
        for name in reg.names() {
            let fam = reg.get(name).unwrap();
            let from_defaults = fam.spec_from_params(&fam.default_params()).unwrap();
            let from_empty = fam.spec_from_params(&ParamMap::new()).unwrap();
            assert_eq!(from_defaults, from_empty);
            assert_eq!(from_defaults.id(), fam.id());
            let keys: Vec<_> = fam.default_params().into_keys().collect();
            let mut names: Vec<_> = fam.param_names().iter().map(|s| s.to_string()).collect();
            names.sort();
            assert_eq!(keys, names);
        }
    }

    #[test]
    fn lookup_by_display_name() {
        let reg = SourceRegistry::with_builtin();
        assert_eq!(reg.get("Coh-2LS-Mix").unwrap().id(), SourceId::Coh2LsMix);
        assert!(matches!(reg.get("laser"), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn unknown_parameter_is_named() {
        let reg = SourceRegistry::with_builtin();
        let fam = reg.get("ph-added").unwrap();
        let err = fam.spec_from_params(&params(&[("rr", 0.3)])).unwrap_err();
        assert!(err.to_string().contains("rr"));
        let err = fam.spec_from_params(&params(&[("m", 1.5)])).unwrap_err();
        assert!(matches!(err, Error::InvalidField { .. }));
    }
}
