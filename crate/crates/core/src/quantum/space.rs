use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModeKind {
    /// Truncated bosonic mode with levels `0..truncation`.
    Boson { truncation: usize },
    /// Two-level system (qubit / hard-core boson), `|0⟩` is the ground state.
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    #[serde(flatten)]
    pub kind: ModeKind,
}

impl ModeSpec {
    pub fn boson(label: impl Into<String>, truncation: usize) -> Self {
        ModeSpec {
            label: label.into(),
            kind: ModeKind::Boson { truncation },
        }
    }

    pub fn two_level(label: impl Into<String>) -> Self {
        ModeSpec {
            label: label.into(),
            kind: ModeKind::TwoLevel,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModeKind::Boson { truncation } => truncation,
            ModeKind::TwoLevel => 2,
        }
    }

    pub fn is_boson(&self) -> bool {
        matches!(self.kind, ModeKind::Boson { .. })
    }
}

/// Ordered tensor product of modes. The first mode is the most significant
/// digit of the basis index (Kronecker convention).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    modes: Vec<ModeSpec>,
    dim: usize,
}

impl HilbertSpace {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Arc<Self>> {
        if modes.is_empty() {
            return Err(Error::invalid("a Hilbert space needs at least one mode"));
        }
        let mut seen = HashSet::new();
        for m in &modes {
            if let ModeKind::Boson { truncation } = m.kind {
                if truncation < 2 {
                    return Err(Error::field(
                        format!("{}.truncation", m.label),
                        "boson truncation must be at least 2",
                    ));
                }
            }
            if !seen.insert(m.label.as_str()) {
                return Err(Error::LabelCollision(m.label.clone()));
            }
        }
        let dim = modes.iter().map(ModeSpec::dim).product();
        Ok(Arc::new(HilbertSpace { modes, dim }))
    }

    pub fn single(mode: ModeSpec) -> Result<Arc<Self>> {
        Self::new(vec![mode])
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(ModeSpec::dim).collect()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        Ok(&self.modes[self.index_of(label)?])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.modes.iter().any(|m| m.label == label)
    }

    /// Product space `self ⊗ other`.
    pub fn compose(&self, other: &HilbertSpace) -> Result<Arc<Self>> {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Self::new(modes)
    }

    /// The same space with one boson mode re-truncated.
    pub fn with_truncation(&self, label: &str, truncation: usize) -> Result<Arc<Self>> {
        let idx = self.index_of(label)?;
        if !self.modes[idx].is_boson() {
            return Err(Error::ModeKindMismatch {
                label: label.to_string(),
                which: "truncation",
            });
        }
        let mut modes = self.modes.clone();
        modes[idx].kind = ModeKind::Boson { truncation };
        Self::new(modes)
    }

    /// Strides of each mode in the flat basis index.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        strides
    }

    /// Multi-index digits of a flat basis index.
    pub(crate) fn digits(&self, mut index: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = index % dims[k];
            index /= dims[k];
        }
        out
    }
}

pub(crate) fn same_space(a: &Arc<HilbertSpace>, b: &Arc<HilbertSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dim_is_product() {
        let s = HilbertSpace::new(vec![
            ModeSpec::boson("a", 3),
            ModeSpec::two_level("s"),
            ModeSpec::boson("b", 4),
        ])
        .unwrap();
        assert_eq!(s.dim(), 24);
        assert_eq!(s.strides(), vec![8, 4, 1]);
        assert_eq!(s.digits(13), vec![1, 1, 1]);
    }

    #[test]
    fn rejects_duplicates_and_tiny_truncation() {
        assert!(matches!(
            HilbertSpace::new(vec![ModeSpec::boson("a", 3), ModeSpec::two_level("a")]),
            Err(Error::LabelCollision(_))
        ));
        assert!(HilbertSpace::single(ModeSpec::boson("a", 1)).is_err());
        assert!(HilbertSpace::new(vec![]).is_err());
    }
}
