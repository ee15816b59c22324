//! Truncated Fock-space and two-level operator algebra.

mod operator;
mod space;
pub(crate) mod sparse;
mod state;

pub use num_complex::Complex64 as C64;
pub use operator::{matrix_exp, mode_operator, Ladder, Operator};
pub use space::{HilbertSpace, ModeKind, ModeSpec};
pub use state::{
    expectation, min_eigenvalue, second_order_coherence, DensityMatrix, Tensor, HERMITIAN_TOL,
    LEAKAGE_LIMIT, N_FLOOR, PSD_TOL, TRACE_TOL,
};

pub(crate) use space::same_space;

/// `Tr[A·B]` without forming the product.
pub fn trace_product(a: &nalgebra::DMatrix<C64>, b: &nalgebra::DMatrix<C64>) -> C64 {
    let d = a.nrows();
    let (a, b) = (a.as_slice(), b.as_slice());
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            // A[j,i] * B[i,j]
            acc += a[j + i * d] * b[i + j * d];
        }
    }
    acc
}
