use nalgebra::DMatrix;

use super::C64;

/// Coordinate-list view of a mostly-zero operator, used to apply ladder
/// products to dense column-major matrices without O(d³) work.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let dim = m.nrows();
        let mut entries = Vec::new();
        for j in 0..dim {
            for i in 0..dim {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseOp { dim, entries }
    }

    pub fn adjoint(&self) -> Self {
        SparseOp {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(i, j, v)| (j, i, v.conj()))
                .collect(),
        }
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += c · S · X`
    pub fn left_mul_acc(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(i, k, v) in &self.entries {
            let cv = c * v;
            for j in 0..d {
                out[i + j * d] += cv * x[k + j * d];
            }
        }
    }

    /// `out += c · X · S`
    pub fn right_mul_acc(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(k, j, v) in &self.entries {
            let cv = c * v;
            let (src, dst) = (&x[k * d..(k + 1) * d], &mut out[j * d..(j + 1) * d]);
            for (o, s) in dst.iter_mut().zip(src) {
                *o += cv * s;
            }
        }
    }

    /// `out += c · X · S†`
    pub fn right_mul_adj_acc(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        // (X S†)[:, k] += X[:, j] conj(S[k, j])
        for &(k, j, v) in &self.entries {
            let cv = c * v.conj();
            let (src, dst) = (&x[j * d..(j + 1) * d], &mut out[k * d..(k + 1) * d]);
            for (o, s) in dst.iter_mut().zip(src) {
                *o += cv * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        DMatrix::from_fn(d, d, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            let b = ((s >> 13 & 0xffff) as f64 / 65536.0) - 0.5;
            if (s >> 7).is_multiple_of(3) {
                C64::new(a, b)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn products_match_dense() {
        let d = 7;
        let s = sample(d, 3);
        let x = sample(d, 11) + sample(d, 5);
        let sp = SparseOp::from_dense(&s);
        let c = C64::new(0.3, -1.2);

        let mut out = vec![C64::new(0.0, 0.0); d * d];
        sp.left_mul_acc(c, x.as_slice(), &mut out);
        let expect = (&s * &x) * c;
        assert!(out
            .iter()
            .zip(expect.iter())
            .all(|(a, b)| (a - b).norm() < 1e-13));

        let mut out = vec![C64::new(0.0, 0.0); d * d];
        sp.right_mul_acc(c, x.as_slice(), &mut out);
        let expect = (&x * &s) * c;
        assert!(out
            .iter()
            .zip(expect.iter())
            .all(|(a, b)| (a - b).norm() < 1e-13));

        let mut out = vec![C64::new(0.0, 0.0); d * d];
        sp.right_mul_adj_acc(c, x.as_slice(), &mut out);
        let expect = (&x * s.adjoint()) * c;
        assert!(out
            .iter()
            .zip(expect.iter())
            .all(|(a, b)| (a - b).norm() < 1e-13));

        assert_eq!(sp.adjoint().to_dense(), s.adjoint());
    }
}
