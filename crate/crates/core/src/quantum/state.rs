use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::operator::{max_abs_diff, reduce_over, retained_indices, Operator};
use super::space::{same_space, HilbertSpace, ModeSpec};
use super::{trace_product, C64};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-7;
pub const PSD_TOL: f64 = 1e-7;
/// Occupations below this make g² undefined.
pub const N_FLOOR: f64 = 1e-8;
/// Largest population allowed to fall outside a truncated Fock basis.
pub const LEAKAGE_LIMIT: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite matrix on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Arc<HilbertSpace>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix.
    pub fn from_matrix(space: Arc<HilbertSpace>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let rho = DensityMatrix { space, matrix };
        rho.validate(PSD_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(space: Arc<HilbertSpace>, matrix: DMatrix<C64>) -> Self {
        DensityMatrix { space, matrix }
    }

    /// Check the Hermiticity, trace and positivity invariants.
    pub fn validate(&self, psd_tol: f64) -> Result<()> {
        if self
            .matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix not Hermitian (max |ρ − ρ†| = {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvariantViolation(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -psd_tol {
            return Err(Error::InvariantViolation(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// Normalized pure state `|ψ⟩⟨ψ|`.
    pub fn pure(space: Arc<HilbertSpace>, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: psi.len(),
            });
        }
        let norm = psi.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::AnnihilatedState { norm });
        }
        let psi = psi / C64::new(norm, 0.0);
        let matrix = &psi * psi.adjoint();
        Ok(DensityMatrix { space, matrix })
    }

    /// Every mode in its ground state.
    pub fn vacuum(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        let mut matrix = DMatrix::zeros(d, d);
        matrix[(0, 0)] = C64::new(1.0, 0.0);
        DensityMatrix {
            space: space.clone(),
            matrix,
        }
    }

    pub fn maximally_mixed(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        DensityMatrix {
            space: space.clone(),
            matrix: DMatrix::identity(d, d) / C64::new(d as f64, 0.0),
        }
    }

    /// Single-mode Fock state `|n⟩⟨n|`.
    pub fn fock(label: &str, truncation: usize, n: usize) -> Result<Self> {
        let space = HilbertSpace::single(ModeSpec::boson(label, truncation))?;
        if n >= truncation {
            return Err(Error::field(
                "fock_n",
                format!("level {n} does not fit in truncation {truncation}"),
            ));
        }
        let mut matrix = DMatrix::zeros(truncation, truncation);
        matrix[(n, n)] = C64::new(1.0, 0.0);
        Ok(DensityMatrix { space, matrix })
    }

    /// Single-mode coherent state `|α⟩⟨α|`, renormalized after truncation.
    pub fn coherent(label: &str, truncation: usize, alpha: C64) -> Result<Self> {
        let space = HilbertSpace::single(ModeSpec::boson(label, truncation))?;
        let mut amps = Vec::with_capacity(truncation);
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..truncation {
            if k > 0 {
                c *= alpha / (k as f64).sqrt();
            }
            amps.push(c);
        }
        let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        check_leakage(1.0 - kept)?;
        Self::pure(space, &DVector::from_vec(amps))
    }

    /// Single-mode thermal state with mean occupation `nbar`.
    pub fn thermal(label: &str, truncation: usize, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::field("nbar", "must be finite and non-negative"));
        }
        let space = HilbertSpace::single(ModeSpec::boson(label, truncation))?;
        let q = nbar / (1.0 + nbar);
        let weights: Vec<f64> = (0..truncation)
            .map(|k| q.powi(k as i32) / (1.0 + nbar))
            .collect();
        check_leakage(q.powi(truncation as i32))?;
        let total: f64 = weights.iter().sum();
        let diag =
            DVector::from_iterator(truncation, weights.iter().map(|w| C64::new(w / total, 0.0)));
        Ok(DensityMatrix {
            space,
            matrix: DMatrix::from_diagonal(&diag),
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self)
    }

    /// Reduced state on the listed modes (in their original order).
    pub fn partial_trace_keep(&self, labels: &[&str]) -> Result<Self> {
        let (sub, matrix) = reduce_over(&self.space, &self.matrix, labels)?;
        Ok(DensityMatrix { space: sub, matrix })
    }

    /// Diagonal of the reduced state of one mode.
    pub fn mode_populations(&self, label: &str) -> Result<Vec<f64>> {
        let reduced = self.partial_trace_keep(&[label])?;
        Ok(reduced.matrix.diagonal().iter().map(|z| z.re).collect())
    }

    /// Project a boson mode onto its lowest `truncation` levels and
    /// renormalize. Returns the state and the discarded population.
    pub fn truncate_boson(&self, label: &str, truncation: usize) -> Result<(Self, f64)> {
        let new_space = self.space.with_truncation(label, truncation)?;
        let keep = retained_indices(&self.space, label, truncation)?;
        let matrix = self.matrix.select_rows(&keep).select_columns(&keep);
        let kept = matrix.trace().re;
        if kept < 1e-12 {
            return Err(Error::AnnihilatedState { norm: kept });
        }
        let discarded = (self.trace() - kept).max(0.0);
        Ok((
            DensityMatrix {
                space: new_space,
                matrix: matrix / C64::new(kept, 0.0),
            },
            discarded,
        ))
    }

    /// `A ρ A† / Tr[A ρ A†]`.
    pub fn apply_and_normalize(&self, op: &Operator) -> Result<Self> {
        if !same_space(&self.space, op.space()) {
            return Err(Error::SpaceMismatch);
        }
        let a = op.matrix();
        let out = a * &self.matrix * a.adjoint();
        let norm = out.trace().re;
        if !norm.is_finite() {
            return Err(Error::NonFinite("apply_and_normalize"));
        }
        if norm <= 1e-12 {
            return Err(Error::AnnihilatedState { norm });
        }
        Ok(DensityMatrix {
            space: self.space.clone(),
            matrix: out / C64::new(norm, 0.0),
        })
    }

    /// `U ρ U†` for a unitary (not checked).
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        if !same_space(&self.space, u.space()) {
            return Err(Error::SpaceMismatch);
        }
        let m = u.matrix() * &self.matrix * u.matrix().adjoint();
        Ok(DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        })
    }

    /// `Σ w_i ρ_i` over states on one space. Weights should sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("empty mixture"))?
            .1;
        let mut matrix = DMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if !same_space(&first.space, &rho.space) {
                return Err(Error::SpaceMismatch);
            }
            matrix += &rho.matrix * C64::new(*w, 0.0);
        }
        Self::from_matrix(first.space.clone(), matrix)
    }
}

fn check_leakage(mass: f64) -> Result<()> {
    if mass > LEAKAGE_LIMIT {
        Err(Error::TruncationLeakage {
            mass,
            limit: LEAKAGE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// `Tr[op · ρ]`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if !same_space(&rho.space, op.space()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(trace_product(op.matrix(), &rho.matrix))
}

/// Zero-delay second-order coherence `Tr[a†a†aaρ] / Tr[a†aρ]²` of mode `a`.
pub fn second_order_coherence(rho: &DensityMatrix, a: &Operator) -> Result<f64> {
    if !same_space(&rho.space, a.space()) {
        return Err(Error::SpaceMismatch);
    }
    let am = a.matrix();
    // Tr[a†a ρ] = Tr[a ρ a†], Tr[a†a†aa ρ] = Tr[a² ρ a²†]
    let a_rho = am * &rho.matrix;
    let n = trace_product(&a_rho, &am.adjoint());
    let a2 = am * am;
    let num = trace_product(&(&a2 * &rho.matrix), &a2.adjoint());
    if !n.re.is_finite() || !num.re.is_finite() {
        return Err(Error::NonFinite("second_order_coherence"));
    }
    if n.re <= N_FLOOR {
        return Err(Error::VacuumDominated { occupation: n.re });
    }
    let scale = num.norm().max(1.0);
    if num.im.abs() > 1e-9 * scale || n.im.abs() > 1e-9 * n.norm().max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "complex moment in g² (imaginary parts {:e}, {:e})",
            num.im, n.im
        )));
    }
    Ok(num.re / (n.re * n.re))
}

/// Smallest eigenvalue of the Hermitian part of `ρ`.
pub fn min_eigenvalue(rho: &DensityMatrix) -> f64 {
    let h = (&rho.matrix + rho.matrix.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Kronecker product on the composed space `self ⊗ other`.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;

    fn tensor_all(items: &[Self]) -> Result<Self>
    where
        Self: Clone,
    {
        let (first, rest) = items
            .split_first()
            .ok_or_else(|| Error::invalid("tensor of an empty list"))?;
        rest.iter().try_fold(first.clone(), |acc, x| acc.tensor(x))
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space().compose(other.space())?;
        Operator::from_matrix(space, self.matrix().kronecker(other.matrix()))
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.compose(&other.space)?;
        Ok(DensityMatrix {
            space,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{matrix_exp, mode_operator, Ladder};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn g2_reference_states() {
        let coh = DensityMatrix::coherent("a", 30, c(1.0)).unwrap();
        let a = mode_operator(coh.space(), "a", Ladder::Annihilate).unwrap();
        assert!((second_order_coherence(&coh, &a).unwrap() - 1.0).abs() < 1e-6);

        let th = DensityMatrix::thermal("a", 40, 0.5).unwrap();
        let a = mode_operator(th.space(), "a", Ladder::Annihilate).unwrap();
        assert!((second_order_coherence(&th, &a).unwrap() - 2.0).abs() < 1e-6);

        let f = DensityMatrix::fock("a", 5, 1).unwrap();
        let a = mode_operator(f.space(), "a", Ladder::Annihilate).unwrap();
        assert_eq!(second_order_coherence(&f, &a).unwrap(), 0.0);
    }

    #[test]
    fn g2_vacuum_is_undefined() {
        let v = DensityMatrix::fock("a", 5, 0).unwrap();
        let a = mode_operator(v.space(), "a", Ladder::Annihilate).unwrap();
        let err = second_order_coherence(&v, &a).unwrap_err();
        assert!(err
            .to_string()
            .contains("vacuum-dominated state, g² undefined"));
    }

    #[test]
    fn expectation_examples() {
        let f = DensityMatrix::fock("a", 3, 1).unwrap();
        let n = mode_operator(f.space(), "a", Ladder::Number).unwrap();
        assert!((expectation(&f, &n).unwrap() - c(1.0)).norm() < 1e-15);

        let s = HilbertSpace::single(ModeSpec::boson("a", 2)).unwrap();
        let mm = DensityMatrix::maximally_mixed(&s);
        let n = mode_operator(&s, "a", Ladder::Number).unwrap();
        assert!((expectation(&mm, &n).unwrap() - c(0.5)).norm() < 1e-15);

        // geometric series Σ k q^k (1−q) with q = n̄/(1+n̄)
        let th = DensityMatrix::thermal("a", 40, 0.5).unwrap();
        let n = mode_operator(th.space(), "a", Ladder::Number).unwrap();
        let q: f64 = 1.0 / 3.0;
        let series: f64 = (0..40).map(|k| k as f64 * q.powi(k) * (1.0 - q)).sum();
        let got = expectation(&th, &n).unwrap().re;
        assert!((got - 0.5).abs() < 1e-6);
        assert!((got - series).abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_foreign_space() {
        let f = DensityMatrix::fock("a", 3, 1).unwrap();
        let s = HilbertSpace::single(ModeSpec::boson("b", 3)).unwrap();
        let n = mode_operator(&s, "b", Ladder::Number).unwrap();
        assert!(matches!(expectation(&f, &n), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn tensor_examples() {
        let s1 = HilbertSpace::single(ModeSpec::two_level("x")).unwrap();
        let s2 = HilbertSpace::single(ModeSpec::two_level("y")).unwrap();
        let i4 = Operator::identity(&s1)
            .tensor(&Operator::identity(&s2))
            .unwrap();
        assert_eq!(i4.matrix(), &DMatrix::<C64>::identity(4, 4));

        let r0 = DensityMatrix::vacuum(&s1);
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 1)] = c(1.0);
        let r1 = DensityMatrix::from_matrix(s2.clone(), m).unwrap();
        let p = r0.tensor(&r1).unwrap();
        let mut expect = DMatrix::zeros(4, 4);
        expect[(1, 1)] = c(1.0);
        assert_eq!(p.matrix(), &expect);
        assert!((p.trace() - 1.0).abs() < 1e-15);

        assert!(matches!(r0.tensor(&r0), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn squeezed_vacuum_matches_closed_form() {
        let d = 60;
        let r: f64 = 0.5;
        let s = HilbertSpace::single(ModeSpec::boson("a", d)).unwrap();
        let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
        let ad = a.dagger();
        let gen = &(&(&a * &a) - &(&ad * &ad)) * (r / 2.0);
        let sq = matrix_exp(&gen).unwrap();
        let psi = sq.matrix().column(0);
        let t = r.tanh();
        let mut max_diff: f64 = 0.0;
        let mut coeff = 1.0 / r.cosh().sqrt();
        for k in 0..d / 2 {
            if k > 0 {
                // c_{2k}/c_{2k−2} = −tanh r · √((2k)(2k−1)) / (2k)
                let kk = k as f64;
                coeff *= -t * ((2.0 * kk) * (2.0 * kk - 1.0)).sqrt() / (2.0 * kk);
            }
            max_diff = max_diff.max((psi[2 * k] - c(coeff)).norm());
            max_diff = max_diff.max(psi[2 * k + 1].norm());
        }
        assert!(max_diff < 1e-8, "max diff {max_diff:e}");
    }

    #[test]
    fn apply_and_normalize_examples() {
        let v = DensityMatrix::fock("a", 4, 0).unwrap();
        let id = Operator::identity(v.space());
        assert_eq!(v.apply_and_normalize(&id).unwrap(), v);

        let ad = mode_operator(v.space(), "a", Ladder::Create).unwrap();
        let one = v.apply_and_normalize(&ad).unwrap();
        let expect = DensityMatrix::fock("a", 4, 1).unwrap();
        assert!(max_abs_diff(one.matrix(), expect.matrix()) < 1e-15);

        let a = ad.dagger();
        assert!(matches!(
            v.apply_and_normalize(&a),
            Err(Error::AnnihilatedState { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_examples() {
        let s = HilbertSpace::single(ModeSpec::two_level("q")).unwrap();
        assert!((DensityMatrix::maximally_mixed(&s).min_eigenvalue() - 0.5).abs() < 1e-14);
        assert!(DensityMatrix::vacuum(&s).min_eigenvalue().abs() < 1e-14);

        // the truncation-20 tail exceeds the leakage limit, so build it by hand
        let q: f64 = 1.0 / 3.0;
        let norm: f64 = (0..20).map(|k| q.powi(k)).sum();
        let diag = DVector::from_iterator(20, (0..20).map(|k| c(q.powi(k) / norm)));
        let s = HilbertSpace::single(ModeSpec::boson("a", 20)).unwrap();
        let th = DensityMatrix::from_matrix(s, DMatrix::from_diagonal(&diag)).unwrap();
        let smallest = q.powi(19) / norm;
        let got = th.min_eigenvalue();
        assert!(got > 0.0);
        assert!((got - smallest).abs() < 1e-14);
    }

    #[test]
    fn leakage_is_reported() {
        assert!(matches!(
            DensityMatrix::coherent("a", 5, c(2.0)),
            Err(Error::TruncationLeakage { .. })
        ));
        assert!(matches!(
            DensityMatrix::thermal("a", 10, 3.0),
            Err(Error::TruncationLeakage { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DensityMatrix::thermal("a", 20, 0.3).unwrap();
        let b = DensityMatrix::coherent("b", 8, C64::new(0.3, 0.2)).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace_keep(&["a"]).unwrap();
        let rb = ab.partial_trace_keep(&["b"]).unwrap();
        assert!(max_abs_diff(ra.matrix(), a.matrix()) < 1e-14);
        assert!(max_abs_diff(rb.matrix(), b.matrix()) < 1e-14);
    }

    #[test]
    fn truncation_renormalizes() {
        let th = DensityMatrix::thermal("a", 30, 0.2).unwrap();
        let (t, lost) = th.truncate_boson("a", 4).unwrap();
        let q: f64 = 0.2 / 1.2;
        assert!((lost - q.powi(4)).abs() < 1e-12);
        assert!((t.trace() - 1.0).abs() < 1e-14);
        assert_eq!(t.dim(), 4);
    }
}
