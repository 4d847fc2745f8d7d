//! Complex linear algebra on composite Hilbert spaces: layouts, operators,
//! Fock-space building blocks, states, partial traces and fidelities.

pub mod fock;
pub mod layout;
pub mod operator;
pub mod state;

pub use fock::{
    annihilation_op, coherent_state, creation_op, fock_cutoff, fock_state, number_op,
    quadrature_op, CoherentState, COHERENT_TAIL_LIMIT,
};
pub use layout::{Factor, HilbertLayout};
pub use operator::{embed, tensor_product, Operator};
pub use state::{
    fidelity_pure, hermitian_eigenvalues, partial_trace, trace_distance, DensityMatrix,
    StateVector, NORM_TOLERANCE,
};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Anything an observable can be evaluated on.
pub trait Expectation {
    fn layout(&self) -> &HilbertLayout;
    fn expect_unchecked(&self, op: &Operator) -> C64;
}

impl Expectation for StateVector {
    fn layout(&self) -> &HilbertLayout {
        StateVector::layout(self)
    }

    fn expect_unchecked(&self, op: &Operator) -> C64 {
        self.amplitudes().dotc(&op.apply(self.amplitudes()))
    }
}

impl Expectation for DensityMatrix {
    fn layout(&self) -> &HilbertLayout {
        DensityMatrix::layout(self)
    }

    fn expect_unchecked(&self, op: &Operator) -> C64 {
        op.trace_product(self.entries())
    }
}

/// `<psi|A|psi>` or `Tr(A rho)`.
pub fn expectation<S: Expectation>(op: &Operator, state: &S) -> Result<C64> {
    if op.layout().dims() != state.layout().dims() {
        return Err(Error::Structure(format!(
            "operator layout {} does not match state layout {}",
            op.layout(),
            state.layout()
        )));
    }
    Ok(state.expect_unchecked(op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense(label: &str, n: usize, vals: &[(f64, f64)]) -> Operator {
        let m = DMatrix::from_iterator(n, n, vals.iter().map(|&(a, b)| c(a, b)));
        Operator::from_dense(HilbertLayout::single(label, n), &m).unwrap()
    }

    fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n * n)
    }

    fn random_density(label: &str, n: usize, vals: &[(f64, f64)]) -> DensityMatrix {
        let m = DMatrix::from_iterator(n, n, vals.iter().map(|&(a, b)| c(a, b)));
        let mut r = &m * m.adjoint();
        let tr = r.trace();
        r /= tr;
        DensityMatrix::new(HilbertLayout::single(label, n), r).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tensor_product_is_associative(a in entries(2), b in entries(3), cc in entries(2)) {
            let (a, b, cc) = (dense("a", 2, &a), dense("b", 3, &b), dense("c", 2, &cc));
            let left = tensor_product(&tensor_product(&a, &b).unwrap(), &cc).unwrap();
            let right = tensor_product(&a, &tensor_product(&b, &cc).unwrap()).unwrap();
            let (l, r) = (left.to_dense(), right.to_dense());
            let scale = l.iter().map(|z| z.norm()).fold(1.0, f64::max);
            prop_assert!((l - r).iter().all(|z| z.norm() <= 4.0 * f64::EPSILON * scale));
            prop_assert_eq!(left.layout(), right.layout());
        }

        #[test]
        fn kron_acts_factorwise(a in entries(2), b in entries(3),
                                u in prop::collection::vec(-1.0..1.0f64, 2),
                                v in prop::collection::vec(-1.0..1.0f64, 3)) {
            let (a, b) = (dense("a", 2, &a), dense("b", 3, &b));
            let u = DVector::from_iterator(2, u.iter().map(|&x| c(x, 0.5 * x)));
            let v = DVector::from_iterator(3, v.iter().map(|&x| c(-x, x)));
            let ab = tensor_product(&a, &b).unwrap();
            let lhs = ab.apply(&u.kronecker(&v));
            let rhs = (a.to_dense() * &u).kronecker(&(b.to_dense() * &v));
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn embed_commutes_with_adjoint(a in entries(3)) {
            let a = dense("cav1", 3, &a);
            let layout = HilbertLayout::new([("dot1", 2), ("cav1", 3), ("cav2", 3)]).unwrap();
            let lhs = embed(&a.adjoint(), "cav1", &layout).unwrap();
            let rhs = embed(&a, "cav1", &layout).unwrap().adjoint();
            prop_assert_eq!(lhs.to_dense(), rhs.to_dense());
        }

        #[test]
        fn coherent_amplitude_ratio(re in -1.5..1.5f64, im in -1.5..1.5f64) {
            let alpha = c(re, im);
            let n = 30;
            let cs = coherent_state(alpha, n).unwrap();
            let amps = cs.state.amplitudes();
            for k in 0..n - 1 {
                let expect = amps[k] * alpha / ((k + 1) as f64).sqrt();
                prop_assert!((amps[k + 1] - expect).norm() <= 1e-14 * (1.0 + amps[k].norm()));
            }
        }

        #[test]
        fn fidelity_ignores_global_phase(phase in 0.0..std::f64::consts::TAU, vals in entries(4)) {
            let rho = random_density("q", 4, &vals);
            let t = StateVector::from_amplitudes(
                HilbertLayout::single("q", 4),
                DVector::from_vec(vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)]),
            ).unwrap();
            let rotated = StateVector::from_amplitudes(
                t.layout().clone(),
                t.amplitudes() * C64::from_polar(1.0, phase),
            ).unwrap();
            let f0 = fidelity_pure(&rho, &t).unwrap();
            let f1 = fidelity_pure(&rho, &rotated).unwrap();
            prop_assert!((f0 - f1).abs() < 1e-13);
        }

        #[test]
        fn reduced_states_stay_valid(va in entries(2), vb in entries(3), vc in entries(2)) {
            let joint = random_density("a", 2, &va)
                .tensor(&random_density("b", 3, &vb)).unwrap()
                .tensor(&random_density("c", 2, &vc)).unwrap();
            for keep in ["a", "b", "c"] {
                let red = partial_trace(&joint, &[keep]).unwrap();
                prop_assert!(red.check(1e-8, 1e-10, 1e-8).is_ok());
            }
            let ra = partial_trace(&joint, &["a"]).unwrap();
            let direct = random_density("a", 2, &va);
            prop_assert!((ra.entries() - direct.entries()).norm() < 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace(vals in entries(12)) {
            let m = DMatrix::from_iterator(12, 12, vals.iter().map(|&(a, b)| c(a, b)));
            let layout = HilbertLayout::new([("a", 2), ("b", 3), ("c", 2)]).unwrap();
            let rho = DensityMatrix::new(layout, m.clone()).unwrap();
            for keep in [&["a"][..], &["b", "c"], &["a", "c"]] {
                let red = partial_trace(&rho, keep).unwrap();
                prop_assert!((red.trace() - m.trace()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expectation_of_identity_is_trace() {
        let l = HilbertLayout::new([("a", 2), ("b", 3)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(l.clone());
        let e = expectation(&Operator::identity(l), &rho).unwrap();
        assert!((e - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hermitian_expectation_is_real() {
        let n = 20;
        let cs = coherent_state(c(0.7, -0.4), n).unwrap();
        let x = quadrature_op(n).unwrap();
        assert!(expectation(&x, &cs.state).unwrap().im.abs() < 1e-12);
        assert!(expectation(&x, &cs.state.to_density()).unwrap().im.abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_layout_mismatch() {
        let s = fock_state(0, 4).unwrap();
        let op = number_op(5).unwrap();
        assert!(matches!(expectation(&op, &s), Err(Error::Structure(_))));
    }
}
