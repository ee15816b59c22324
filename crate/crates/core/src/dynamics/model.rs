use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{same_space, HilbertSpace, Operator};

/// Rectangular switching function: on for `t1 ≤ t < t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t1: f64,
    pub t2: f64,
}

impl Window {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let w = Window { t1, t2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t1.is_finite() || !self.t2.is_finite() || self.t1 >= self.t2 {
            return Err(Error::field(
                "window",
                format!("need finite t1 < t2, got [{}, {}]", self.t1, self.t2),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t1 <= t && t < self.t2
    }
}

#[derive(Debug, Clone)]
pub struct Dissipator {
    pub op: Operator,
    pub rate: f64,
}

/// One-way coupling `weight·([s ρ, T†] + [T, ρ s†])` that feeds the field of
/// `source` into `target` while the window is on.
#[derive(Debug, Clone)]
pub struct CascadeTerm {
    pub source: Operator,
    pub target: Operator,
    pub weight: f64,
    pub window: Window,
}

#[derive(Debug, Clone)]
pub struct PulsedDissipator {
    pub op: Operator,
    pub rate: f64,
    pub window: Window,
}

/// Generator `dρ/dt = −i[H, ρ] + Σ rate·D[x]ρ + windowed terms`,
/// with `D[x]ρ = xρx† − ½{x†x, ρ}`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    space: Arc<HilbertSpace>,
    hamiltonian: Operator,
    dissipators: Vec<Dissipator>,
    cascade_terms: Vec<CascadeTerm>,
    pulsed: Vec<PulsedDissipator>,
}

impl LindbladModel {
    pub fn new(space: &Arc<HilbertSpace>) -> Self {
        LindbladModel {
            space: space.clone(),
            hamiltonian: Operator::zeros(space),
            dissipators: Vec::new(),
            cascade_terms: Vec::new(),
            pulsed: Vec::new(),
        }
    }

    fn check_op(&self, op: &Operator) -> Result<()> {
        if same_space(&self.space, op.space()) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    fn check_rate(rate: f64) -> Result<()> {
        if rate.is_finite() && rate >= 0.0 {
            Ok(())
        } else {
            Err(Error::field(
                "rate",
                format!("must be finite and ≥ 0, got {rate}"),
            ))
        }
    }

    pub fn with_hamiltonian(mut self, h: Operator) -> Result<Self> {
        self.check_op(&h)?;
        if h.hermiticity_error() > 1e-12 * h.matrix().norm().max(1.0) {
            return Err(Error::invalid("Hamiltonian is not Hermitian"));
        }
        self.hamiltonian = h;
        Ok(self)
    }

    pub fn add_dissipator(mut self, op: Operator, rate: f64) -> Result<Self> {
        self.check_op(&op)?;
        Self::check_rate(rate)?;
        self.dissipators.push(Dissipator { op, rate });
        Ok(self)
    }

    pub fn add_cascade(
        mut self,
        source: Operator,
        target: Operator,
        weight: f64,
        window: Window,
    ) -> Result<Self> {
        self.check_op(&source)?;
        self.check_op(&target)?;
        window.validate()?;
        if !weight.is_finite() {
            return Err(Error::field("weight", "must be finite"));
        }
        self.cascade_terms.push(CascadeTerm {
            source,
            target,
            weight,
            window,
        });
        Ok(self)
    }

    pub fn add_pulsed_dissipator(
        mut self,
        op: Operator,
        rate: f64,
        window: Window,
    ) -> Result<Self> {
        self.check_op(&op)?;
        Self::check_rate(rate)?;
        window.validate()?;
        self.pulsed.push(PulsedDissipator { op, rate, window });
        Ok(self)
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    pub fn cascade_terms(&self) -> &[CascadeTerm] {
        &self.cascade_terms
    }

    pub fn pulsed_dissipators(&self) -> &[PulsedDissipator] {
        &self.pulsed
    }

    pub fn is_autonomous(&self) -> bool {
        self.cascade_terms.is_empty() && self.pulsed.is_empty()
    }

    /// Sorted, de-duplicated window edges.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .cascade_terms
            .iter()
            .map(|c| c.window)
            .chain(self.pulsed.iter().map(|p| p.window))
            .flat_map(|w| [w.t1, w.t2])
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}
