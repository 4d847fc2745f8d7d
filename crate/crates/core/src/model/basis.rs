use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qcore::{HilbertLayout, Operator, StateVector, C64};

/// Dot levels in basis order. The effective model keeps the first two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DotLevel {
    XMinus,
    XPlus,
    TMinus,
    TPlus,
}

impl DotLevel {
    pub fn index(self) -> usize {
        match self {
            DotLevel::XMinus => 0,
            DotLevel::XPlus => 1,
            DotLevel::TMinus => 2,
            DotLevel::TPlus => 3,
        }
    }
}

/// Dimension of the effective two-level dot.
pub const EFFECTIVE_DOT_DIM: usize = 2;
/// Dimension of the dot with both trion levels.
pub const FULL_DOT_DIM: usize = 4;

pub fn dot_label(node: usize) -> String {
    format!("dot{node}")
}

pub fn cavity_label(node: usize) -> String {
    format!("cav{node}")
}

/// `(dot1:2, dot2:2, cav1:N, cav2:N)`.
pub fn two_node_layout(n_fock: usize) -> HilbertLayout {
    HilbertLayout::new([
        ("dot1", EFFECTIVE_DOT_DIM),
        ("dot2", EFFECTIVE_DOT_DIM),
        ("cav1", n_fock),
        ("cav2", n_fock),
    ])
    .expect("fixed labels are distinct")
}

/// `(dot<i>:dot_dim, cav<i>:N)`.
pub fn single_node_layout(node: usize, dot_dim: usize, n_fock: usize) -> HilbertLayout {
    HilbertLayout::new([(dot_label(node), dot_dim), (cavity_label(node), n_fock)])
        .expect("fixed labels are distinct")
}

/// `|to><from|` on a dot of dimension `dim`.
pub fn dot_transition(to: DotLevel, from: DotLevel, dim: usize) -> Result<Operator> {
    if to.index() >= dim || from.index() >= dim {
        return Err(Error::Structure(format!(
            "level {to:?} or {from:?} outside a {dim}-level dot"
        )));
    }
    Operator::from_triplets(
        HilbertLayout::single("dot", dim),
        [(to.index(), from.index(), C64::new(1.0, 0.0))],
    )
}

pub fn dot_projector(level: DotLevel, dim: usize) -> Result<Operator> {
    dot_transition(level, level, dim)
}

/// `sigma_y = |X-><X+| + |X+><X-|`.
pub fn sigma_y(dim: usize) -> Result<Operator> {
    let a = dot_transition(DotLevel::XMinus, DotLevel::XPlus, dim)?;
    Ok(&a + &a.adjoint())
}

/// `|X+><X+| - |X-><X-|`, diagonal in the level basis.
pub fn sigma_z(dim: usize) -> Result<Operator> {
    Ok(&dot_projector(DotLevel::XPlus, dim)? - &dot_projector(DotLevel::XMinus, dim)?)
}

/// Eigenstates `|y+-> = (|X-> +- |X+>)/sqrt 2` of `sigma_y`.
pub fn y_state(sign: i8, dim: usize) -> Result<DVector<C64>> {
    if dim < EFFECTIVE_DOT_DIM {
        return Err(Error::Structure(format!("{dim}-level dot has no y states")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DVector::zeros(dim);
    v[DotLevel::XMinus.index()] = C64::new(s, 0.0);
    v[DotLevel::XPlus.index()] = C64::new(if sign >= 0 { s } else { -s }, 0.0);
    Ok(v)
}

pub fn level_state(level: DotLevel, dim: usize) -> Result<DVector<C64>> {
    if level.index() >= dim {
        return Err(Error::Structure(format!("level {level:?} outside a {dim}-level dot")));
    }
    let mut v = DVector::zeros(dim);
    v[level.index()] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Product state `|d1, d2, n1, n2>` with the cavities in Fock states.
pub fn two_node_product(
    dot1: &DVector<C64>,
    dot2: &DVector<C64>,
    cav1: &DVector<C64>,
    cav2: &DVector<C64>,
) -> Result<StateVector> {
    let n = cav1.len();
    if cav2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cav2.len(),
        });
    }
    let v = dot1.kronecker(dot2).kronecker(cav1).kronecker(cav2);
    StateVector::from_amplitudes(two_node_layout(n), v)
}

/// `|X->|X->|0>|0>`.
pub fn two_node_ground(n_fock: usize) -> Result<StateVector> {
    let x = level_state(DotLevel::XMinus, EFFECTIVE_DOT_DIM)?;
    let vac = fock_vector(0, n_fock);
    two_node_product(&x, &x, &vac, &vac)
}

pub fn fock_vector(n: usize, n_fock: usize) -> DVector<C64> {
    let mut v = DVector::zeros(n_fock);
    v[n] = C64::new(1.0, 0.0);
    v
}

/// Two-dot Bell state `(|y_a y_b> + sign |y_-a y_-b>)/sqrt 2` on `(dot1, dot2)`.
pub fn bell_y_state(a: i8, b: i8, relative_sign: f64) -> Result<StateVector> {
    let d = EFFECTIVE_DOT_DIM;
    let first = y_state(a, d)?.kronecker(&y_state(b, d)?);
    let second = y_state(-a, d)?.kronecker(&y_state(-b, d)?);
    let v = (first + second * C64::new(relative_sign, 0.0)) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    StateVector::from_amplitudes(
        HilbertLayout::new([("dot1", d), ("dot2", d)]).expect("fixed labels are distinct"),
        v,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_states_are_sigma_y_eigenstates() {
        let sy = sigma_y(2).unwrap();
        let yp = y_state(1, 2).unwrap();
        let ym = y_state(-1, 2).unwrap();
        assert!(yp.dotc(&ym).norm() < 1e-15);
        assert!((sy.apply(&yp) - &yp).norm() < 1e-15);
        assert!((sy.apply(&ym) + &ym).norm() < 1e-15);
    }

    #[test]
    fn bell_states_are_orthonormal() {
        let states = [
            bell_y_state(1, 1, 1.0).unwrap(),
            bell_y_state(1, 1, -1.0).unwrap(),
            bell_y_state(1, -1, 1.0).unwrap(),
            bell_y_state(1, -1, -1.0).unwrap(),
        ];
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let o = a.inner(b).unwrap().norm();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
