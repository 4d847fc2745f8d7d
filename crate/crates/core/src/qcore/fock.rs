use nalgebra::DVector;

use super::layout::HilbertLayout;
use super::operator::Operator;
use super::state::StateVector;
use super::C64;
use crate::error::{Error, Result};

/// Largest pre-renormalization tail mass a truncated coherent state may drop.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-4;

const MODE_LABEL: &str = "mode";

fn check_fock(n_fock: usize) -> Result<()> {
    if n_fock < 2 {
        return Err(Error::InvalidParam(format!("n_fock must be >= 2, got {n_fock}")));
    }
    Ok(())
}

/// Truncated ladder operator with `<n-1|a|n> = sqrt(n)`.
///
/// The creation operator is its adjoint, so `a†` maps the top level to zero.
pub fn annihilation_op(n_fock: usize) -> Result<Operator> {
    check_fock(n_fock)?;
    Operator::from_triplets(
        HilbertLayout::single(MODE_LABEL, n_fock),
        (1..n_fock).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

pub fn creation_op(n_fock: usize) -> Result<Operator> {
    Ok(annihilation_op(n_fock)?.adjoint())
}

pub fn number_op(n_fock: usize) -> Result<Operator> {
    check_fock(n_fock)?;
    Operator::from_triplets(
        HilbertLayout::single(MODE_LABEL, n_fock),
        (1..n_fock).map(|n| (n, n, C64::new(n as f64, 0.0))),
    )
}

/// `a + a†`, the field quadrature the dots couple to.
pub fn quadrature_op(n_fock: usize) -> Result<Operator> {
    let a = annihilation_op(n_fock)?;
    Ok(&a + &a.adjoint())
}

pub fn fock_state(n: usize, n_fock: usize) -> Result<StateVector> {
    check_fock(n_fock)?;
    if n >= n_fock {
        return Err(Error::InvalidParam(format!("Fock level {n} outside cutoff {n_fock}")));
    }
    StateVector::basis(HilbertLayout::single(MODE_LABEL, n_fock), n)
}

/// A truncated, renormalized coherent state and the probability mass that
/// the truncation removed.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub state: StateVector,
    pub tail_mass: f64,
}

/// `|alpha>` on `n_fock` levels: `c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!)`,
/// renormalized after truncation.
pub fn coherent_state(alpha: C64, n_fock: usize) -> Result<CoherentState> {
    check_fock(n_fock)?;
    let mut amps = DVector::zeros(n_fock);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..n_fock {
        amps[n] = c;
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let tail_mass = (1.0 - kept).max(0.0);
    if tail_mass > COHERENT_TAIL_LIMIT {
        return Err(Error::Truncation {
            tail: tail_mass,
            limit: COHERENT_TAIL_LIMIT,
            n_fock,
        });
    }
    amps /= C64::new(kept.sqrt(), 0.0);
    Ok(CoherentState {
        state: StateVector::from_amplitudes(HilbertLayout::single(MODE_LABEL, n_fock), amps)?,
        tail_mass,
    })
}

/// Default Fock cutoff for a field that reaches amplitude `alpha_max`:
/// `ceil((|alpha_max| + 3)^2)`.
pub fn fock_cutoff(alpha_max: f64) -> usize {
    let n = (alpha_max.abs() + 3.0).powi(2).ceil() as usize;
    n.max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::expectation;

    #[test]
    fn ladder_elements() {
        let a = annihilation_op(5).unwrap();
        assert!((a.get(1, 2).re - 2f64.sqrt()).abs() < 1e-15);
        let vac = fock_state(0, 5).unwrap();
        assert_eq!(a.apply(vac.amplitudes()).norm(), 0.0);
        assert!(matches!(annihilation_op(1), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn truncated_commutator_defect_sits_in_last_entry() {
        let n = 6;
        let a = annihilation_op(n).unwrap().to_dense();
        let ad = a.adjoint();
        let comm = &a * &ad - &ad * &a;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j && i < n - 1 {
                    1.0
                } else if i == n - 1 && j == n - 1 {
                    -((n - 1) as f64)
                } else {
                    0.0
                };
                assert!((comm[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn vacuum_for_zero_amplitude() {
        let cs = coherent_state(C64::new(0.0, 0.0), 8).unwrap();
        assert_eq!(cs.state.amplitudes()[0], C64::new(1.0, 0.0));
        assert_eq!(cs.tail_mass, 0.0);
        assert!(cs.state.amplitudes().iter().skip(1).all(|a| *a == C64::new(0.0, 0.0)));
    }

    #[test]
    fn coherent_moments() {
        let n = 20;
        let cs = coherent_state(C64::new(1.0, 0.0), n).unwrap();
        let a = annihilation_op(n).unwrap();
        let num = number_op(n).unwrap();
        assert!((expectation(&a, &cs.state).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-6);
        assert!((expectation(&num, &cs.state).unwrap().re - 1.0).abs() < 1e-6);
        let cs = coherent_state(C64::new(1.5, 0.0), n).unwrap();
        assert!((expectation(&num, &cs.state).unwrap().re - 2.25).abs() < 1e-6);
    }

    #[test]
    fn tail_mass_matches_poisson_tail() {
        // Independent oracle: Poisson(4) mass at n >= 16, summed from the pmf.
        let mut pmf = (-4.0f64).exp();
        let mut head = 0.0;
        for n in 0..16 {
            head += pmf;
            pmf *= 4.0 / (n + 1) as f64;
        }
        let oracle = 1.0 - head;
        let cs = coherent_state(C64::new(2.0, 0.0), 16).unwrap();
        assert!((cs.tail_mass - oracle).abs() < 1e-12);
        assert!(cs.tail_mass > 4e-6 && cs.tail_mass < 6e-6, "{}", cs.tail_mass);
    }

    #[test]
    fn truncation_error_when_cutoff_too_small() {
        assert!(matches!(
            coherent_state(C64::new(3.0, 0.0), 8),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn cutoff_policy() {
        assert_eq!(fock_cutoff(2.0), 25);
        assert_eq!(fock_cutoff(0.0), 9);
    }
}
