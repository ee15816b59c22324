use nalgebra::DMatrix;

use super::model::LindbladModel;
use crate::quantum::sparse::SparseOp;
use crate::quantum::C64;

/// The generator restricted to one set of active terms, in the form
/// `L(ρ) = Kρ + ρK† + Σ c·x ρ y†`.
///
/// `K = −iH − ½Σ rate·x†x − Σ w·T†s` collects every one-sided product,
/// which keeps the per-call work to a handful of sparse products.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    dim: usize,
    k: SparseOp,
    k_adj: SparseOp,
    sandwiches: Vec<Sandwich>,
}

#[derive(Debug, Clone)]
struct Sandwich {
    c: f64,
    x: SparseOp,
    y: SparseOp,
    // adjoint form c·y†Ox needs y† on the left
    y_adj: SparseOp,
}

impl Generator {
    /// Compile the terms active according to the predicates.
    pub fn compile(
        model: &LindbladModel,
        cascade_on: impl Fn(usize) -> bool,
        pulsed_on: impl Fn(usize) -> bool,
    ) -> Self {
        let d = model.space().dim();
        let mi = C64::new(0.0, -1.0);
        let mut k: DMatrix<C64> = model.hamiltonian().matrix() * mi;
        let mut sandwiches = Vec::new();

        let mut jump = |op: &DMatrix<C64>, rate: f64, k: &mut DMatrix<C64>| {
            if rate == 0.0 {
                return;
            }
            *k -= (op.adjoint() * op) * C64::new(0.5 * rate, 0.0);
            let x = SparseOp::from_dense(op);
            sandwiches.push(Sandwich {
                c: rate,
                y_adj: x.adjoint(),
                y: x.clone(),
                x,
            });
        };
        for dsp in model.dissipators() {
            jump(dsp.op.matrix(), dsp.rate, &mut k);
        }
        for (i, p) in model.pulsed_dissipators().iter().enumerate() {
            if pulsed_on(i) {
                jump(p.op.matrix(), p.rate, &mut k);
            }
        }
        for (i, c) in model.cascade_terms().iter().enumerate() {
            if !cascade_on(i) || c.weight == 0.0 {
                continue;
            }
            let s = c.source.matrix();
            let t = c.target.matrix();
            k -= (t.adjoint() * s) * C64::new(c.weight, 0.0);
            let (ss, ts) = (SparseOp::from_dense(s), SparseOp::from_dense(t));
            sandwiches.push(Sandwich {
                c: c.weight,
                x: ss.clone(),
                y: ts.clone(),
                y_adj: ts.adjoint(),
            });
            sandwiches.push(Sandwich {
                c: c.weight,
                x: ts,
                y_adj: ss.adjoint(),
                y: ss,
            });
        }
        let k = SparseOp::from_dense(&k);
        Generator {
            dim: d,
            k_adj: k.adjoint(),
            k,
            sandwiches,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L(ρ)`; `scratch` must hold `dim²` entries.
    pub fn apply(&self, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let one = C64::new(1.0, 0.0);
        out.fill(C64::new(0.0, 0.0));
        self.k.left_mul_acc(one, rho, out);
        self.k.right_mul_adj_acc(one, rho, out);
        for s in &self.sandwiches {
            scratch.fill(C64::new(0.0, 0.0));
            s.x.left_mul_acc(one, rho, scratch);
            s.y.right_mul_adj_acc(C64::new(s.c, 0.0), scratch, out);
        }
    }

    /// `out = L†(O)` with respect to `Tr[O L(ρ)] = Tr[L†(O) ρ]`.
    pub fn apply_adjoint(&self, o: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let one = C64::new(1.0, 0.0);
        out.fill(C64::new(0.0, 0.0));
        self.k_adj.left_mul_acc(one, o, out);
        self.k.right_mul_acc(one, o, out);
        for s in &self.sandwiches {
            scratch.fill(C64::new(0.0, 0.0));
            s.y_adj.left_mul_acc(one, o, scratch);
            s.x.right_mul_acc(C64::new(s.c, 0.0), scratch, out);
        }
    }

    /// Column-stacked Liouvillian as triplets: `vec(L(ρ)) = M·vec(ρ)`.
    pub fn liouvillian_triplets(&self) -> Vec<(usize, usize, C64)> {
        let d = self.dim;
        let mut trip = Vec::new();
        // vec(Kρ) = (I ⊗ K) vec ρ
        for &(i, k, v) in &self.k.entries {
            for j in 0..d {
                trip.push((i + j * d, k + j * d, v));
            }
        }
        // vec(ρK†) = (conj(K) ⊗ I) vec ρ
        for &(j, l, v) in &self.k.entries {
            let v = v.conj();
            for i in 0..d {
                trip.push((i + j * d, i + l * d, v));
            }
        }
        // vec(xρy†) = (conj(y) ⊗ x) vec ρ
        for s in &self.sandwiches {
            for &(j, l, yv) in &s.y.entries {
                let yv = yv.conj() * s.c;
                for &(i, k, xv) in &s.x.entries {
                    trip.push((i + j * d, k + l * d, yv * xv));
                }
            }
        }
        trip
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::Window;
    use crate::quantum::{mode_operator, HilbertSpace, Ladder, ModeSpec};

    fn random_matrix(d: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        DMatrix::from_fn(d, d, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            C64::new(
                (s >> 40) as f64 / (1u64 << 24) as f64 - 0.5,
                ((s >> 16) & 0xffffff) as f64 / (1u64 << 24) as f64 - 0.5,
            )
        })
    }

    fn dense_rhs(model: &LindbladModel, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let h = model.hamiltonian().matrix();
        let mi = C64::new(0.0, -1.0);
        let mut out = (h * rho - rho * h) * mi;
        for dsp in model.dissipators() {
            let x = dsp.op.matrix();
            let xd = x.adjoint();
            out += (x * rho * &xd - (&xd * x * rho + rho * &xd * x) * C64::new(0.5, 0.0))
                * C64::new(dsp.rate, 0.0);
        }
        for c in model.cascade_terms() {
            let (s, t) = (c.source.matrix(), c.target.matrix());
            let srho = s * rho;
            let rsd = rho * s.adjoint();
            out += ((&srho * t.adjoint() - t.adjoint() * &srho) + (t * &rsd - &rsd * t))
                * C64::new(c.weight, 0.0);
        }
        out
    }

    fn model() -> LindbladModel {
        let s = HilbertSpace::new(vec![ModeSpec::two_level("q"), ModeSpec::boson("a", 3)]).unwrap();
        let sm = mode_operator(&s, "q", Ladder::Lower).unwrap();
        let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
        let h =
            &(&sm + &sm.dagger()) * 0.7 + &mode_operator(&s, "a", Ladder::Number).unwrap() * 0.3;
        LindbladModel::new(&s)
            .with_hamiltonian(h)
            .unwrap()
            .add_dissipator(sm.clone(), 1.1)
            .unwrap()
            .add_dissipator(a.clone(), 0.4)
            .unwrap()
            .add_cascade(a, sm, 0.6, Window::new(0.0, 1.0).unwrap())
            .unwrap()
    }

    #[test]
    fn forward_adjoint_and_liouvillian_agree_with_dense() {
        let m = model();
        let g = Generator::compile(&m, |_| true, |_| true);
        let d = g.dim();
        let rho = random_matrix(d, 1);
        let o = random_matrix(d, 2);
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let mut scratch = out.clone();

        g.apply(rho.as_slice(), &mut out, &mut scratch);
        let expect = dense_rhs(&m, &rho);
        let err = out
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "forward {err:e}");

        let mut adj = vec![C64::new(0.0, 0.0); d * d];
        g.apply_adjoint(o.as_slice(), &mut adj, &mut scratch);
        let adj = DMatrix::from_column_slice(d, d, &adj);
        let lhs = crate::quantum::trace_product(&o, &expect);
        let rhs = crate::quantum::trace_product(&adj, &rho);
        assert!((lhs - rhs).norm() < 1e-12);

        let mut lv = DMatrix::<C64>::zeros(d * d, d * d);
        for (i, j, v) in g.liouvillian_triplets() {
            lv[(i, j)] += v;
        }
        let vec_rho = nalgebra::DVector::from_column_slice(rho.as_slice());
        let got = lv * vec_rho;
        let err = got
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "liouvillian {err:e}");
    }

    #[test]
    fn inactive_terms_are_dropped() {
        let m = model();
        let g = Generator::compile(&m, |_| false, |_| false);
        let d = g.dim();
        let rho = random_matrix(d, 3);
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let mut scratch = out.clone();
        g.apply(rho.as_slice(), &mut out, &mut scratch);
        let mut off = LindbladModel::new(m.space())
            .with_hamiltonian(m.hamiltonian().clone())
            .unwrap();
        for dsp in m.dissipators() {
            off = off.add_dissipator(dsp.op.clone(), dsp.rate).unwrap();
        }
        let expect = dense_rhs(&off, &rho);
        let err = out
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13);
    }
}
