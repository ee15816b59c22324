use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::space::{same_space, HilbertSpace, ModeKind};
use super::C64;
use crate::error::{Error, Result};

/// Which single-mode operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Annihilate,
    Create,
    Number,
    Lower,
    Raise,
}

impl Ladder {
    fn name(self) -> &'static str {
        match self {
            Ladder::Annihilate => "annihilate",
            Ladder::Create => "create",
            Ladder::Number => "number",
            Ladder::Lower => "lower",
            Ladder::Raise => "raise",
        }
    }
}

/// Dense operator on a [`HilbertSpace`].
///
/// Arithmetic through the `std::ops` traits panics when the operands live on
/// different spaces, like dimension mismatches in `nalgebra`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Arc<HilbertSpace>,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(space: Arc<HilbertSpace>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Operator { space, matrix })
    }

    pub fn identity(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Operator {
            space: space.clone(),
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Operator {
            space: space.clone(),
            matrix: DMatrix::zeros(d, d),
        }
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

    pub fn dagger(&self) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Operator::identity(&self.space);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    /// Restrict a boson mode to its lowest `truncation` levels (`P·A·P`).
    pub fn truncate_boson(&self, label: &str, truncation: usize) -> Result<Self> {
        let new_space = self.space.with_truncation(label, truncation)?;
        let keep = retained_indices(&self.space, label, truncation)?;
        let matrix = self.matrix.select_rows(&keep).select_columns(&keep);
        Ok(Operator {
            space: new_space,
            matrix,
        })
    }

    /// If `self = X ⊗ I` with `X` acting on the modes in `labels` (kept in
    /// their original order), return `X`. Fails when the operator acts
    /// non-trivially on any discarded mode.
    pub fn restrict_to(&self, labels: &[&str]) -> Result<Self> {
        let (sub, reduced) = reduce_over(&self.space, &self.matrix, labels)?;
        let rest_dim = (self.space.dim() / sub.dim()) as f64;
        let reduced = reduced / C64::new(rest_dim, 0.0);
        let candidate = Operator {
            space: sub,
            matrix: reduced,
        };
        let rebuilt = embed_ordered(&candidate, &self.space)?;
        let scale = self.matrix.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        if max_abs_diff(&rebuilt, &self.matrix) > 1e-12 * scale {
            return Err(Error::invalid(
                "operator acts non-trivially on the modes being discarded",
            ));
        }
        Ok(candidate)
    }
}

/// Single-mode operator embedded in `space` with identities on every other mode.
pub fn mode_operator(space: &Arc<HilbertSpace>, label: &str, which: Ladder) -> Result<Operator> {
    let idx = space.index_of(label)?;
    let mode = &space.modes()[idx];
    let local = match (mode.kind, which) {
        (ModeKind::Boson { truncation }, Ladder::Annihilate) => boson_annihilation(truncation),
        (ModeKind::Boson { truncation }, Ladder::Create) => {
            boson_annihilation(truncation).adjoint()
        }
        (ModeKind::Boson { truncation }, Ladder::Number) => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                truncation,
                (0..truncation).map(|k| C64::new(k as f64, 0.0)),
            ))
        }
        (ModeKind::TwoLevel, Ladder::Lower) => {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 1)] = C64::new(1.0, 0.0);
            m
        }
        (ModeKind::TwoLevel, Ladder::Raise) => {
            let mut m = DMatrix::zeros(2, 2);
            m[(1, 0)] = C64::new(1.0, 0.0);
            m
        }
        _ => {
            return Err(Error::ModeKindMismatch {
                label: label.to_string(),
                which: which.name(),
            })
        }
    };
    Ok(embed_local(space, idx, &local))
}

fn boson_annihilation(d: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    for k in 1..d {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    m
}

fn embed_local(space: &Arc<HilbertSpace>, idx: usize, local: &DMatrix<C64>) -> Operator {
    let dims = space.dims();
    let left: usize = dims[..idx].iter().product();
    let right: usize = dims[idx + 1..].iter().product();
    let matrix = DMatrix::<C64>::identity(left, left)
        .kronecker(local)
        .kronecker(&DMatrix::<C64>::identity(right, right));
    Operator {
        space: space.clone(),
        matrix,
    }
}

/// Matrix exponential `exp(A)` (Padé scaling and squaring).
pub fn matrix_exp(op: &Operator) -> Result<Operator> {
    if op
        .matrix
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFinite("matrix_exp input"));
    }
    let matrix = op.matrix.clone().exp();
    if matrix
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFinite("matrix_exp result"));
    }
    Ok(Operator {
        space: op.space.clone(),
        matrix,
    })
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()))
}

/// Flat indices (in `space`) of basis states whose `label` level is below `truncation`.
pub(crate) fn retained_indices(
    space: &HilbertSpace,
    label: &str,
    truncation: usize,
) -> Result<Vec<usize>> {
    let idx = space.index_of(label)?;
    let mode = &space.modes()[idx];
    if !mode.is_boson() {
        return Err(Error::ModeKindMismatch {
            label: label.to_string(),
            which: "truncation",
        });
    }
    if truncation < 2 || truncation > mode.dim() {
        return Err(Error::field(
            format!("{label}.truncation"),
            format!("must lie in [2, {}]", mode.dim()),
        ));
    }
    Ok((0..space.dim())
        .filter(|&i| space.digits(i)[idx] < truncation)
        .collect())
}

/// Partial trace of a matrix over every mode not listed in `labels`.
pub(crate) fn reduce_over(
    space: &HilbertSpace,
    matrix: &DMatrix<C64>,
    labels: &[&str],
) -> Result<(Arc<HilbertSpace>, DMatrix<C64>)> {
    let mut kept: Vec<usize> = labels
        .iter()
        .map(|l| space.index_of(l))
        .collect::<Result<_>>()?;
    kept.sort_unstable();
    kept.dedup();
    let sub = HilbertSpace::new(kept.iter().map(|&k| space.modes()[k].clone()).collect())?;
    let dims = space.dims();
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let strides = space.strides();
    let sub_dim = sub.dim();
    let rest_dim: usize = rest.iter().map(|&k| dims[k]).product();

    // full index for (kept-multi-index a, rest-multi-index r)
    let decode = |mut i: usize, modes: &[usize]| -> usize {
        let mut full = 0;
        for &k in modes.iter().rev() {
            full += (i % dims[k]) * strides[k];
            i /= dims[k];
        }
        full
    };
    let kept_off: Vec<usize> = (0..sub_dim).map(|a| decode(a, &kept)).collect();
    let rest_off: Vec<usize> = (0..rest_dim).map(|r| decode(r, &rest)).collect();

    let mut out = DMatrix::zeros(sub_dim, sub_dim);
    for &ro in &rest_off {
        for b in 0..sub_dim {
            let col = kept_off[b] + ro;
            for a in 0..sub_dim {
                out[(a, b)] += matrix[(kept_off[a] + ro, col)];
            }
        }
    }
    Ok((sub, out))
}

/// Embed an operator on a sub-space into a larger space whose mode order is
/// compatible (the sub-space modes appear in the same relative order).
pub(crate) fn embed_ordered(op: &Operator, space: &Arc<HilbertSpace>) -> Result<DMatrix<C64>> {
    let sub = op.space();
    let kept: Vec<usize> = sub
        .modes()
        .iter()
        .map(|m| space.index_of(&m.label))
        .collect::<Result<_>>()?;
    if kept.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sub-space modes are out of order"));
    }
    for (m, &k) in sub.modes().iter().zip(&kept) {
        if space.modes()[k] != *m {
            return Err(Error::SpaceMismatch);
        }
    }
    let d = space.dim();
    let dims = space.dims();
    let sub_strides = sub.strides();
    let sub_index = |i: usize| -> (usize, Vec<usize>) {
        let digits = space.digits(i);
        let mut s = 0;
        for (j, &k) in kept.iter().enumerate() {
            s += digits[k] * sub_strides[j];
        }
        let rest: Vec<usize> = (0..dims.len())
            .filter(|k| !kept.contains(k))
            .map(|k| digits[k])
            .collect();
        (s, rest)
    };
    let decoded: Vec<(usize, Vec<usize>)> = (0..d).map(sub_index).collect();
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            if decoded[i].1 == decoded[j].1 {
                out[(i, j)] = op.matrix()[(decoded[i].0, decoded[j].0)];
            }
        }
    }
    Ok(out)
}

fn assert_same(a: &Operator, b: &Operator) {
    assert!(
        same_space(&a.space, &b.space),
        "operators live on different Hilbert spaces"
    );
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        &self * rhs
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        &self * rhs
    }
}
