use super::basis::{
    cavity_label, dot_label, dot_projector, dot_transition, sigma_y, DotLevel, EFFECTIVE_DOT_DIM,
    FULL_DOT_DIM,
};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::qcore::{annihilation_op, embed, quadrature_op, HilbertLayout, Operator, C64};

/// Nodes `i` whose `dot<i>` and `cav<i>` factors are both present.
pub(crate) fn nodes_in(layout: &HilbertLayout) -> Vec<usize> {
    (1..=2)
        .filter(|&i| layout.has(&dot_label(i)) && layout.has(&cavity_label(i)))
        .collect()
}

fn require_nodes(layout: &HilbertLayout) -> Result<Vec<usize>> {
    let nodes = nodes_in(layout);
    if nodes.is_empty() {
        return Err(Error::Structure(format!(
            "layout {layout} has no dot<i>/cav<i> pair"
        )));
    }
    Ok(nodes)
}

/// `H_eff = sum_i lambda_i sigma_y^i (a_i + a_i†)` over the nodes in `layout`.
pub fn build_effective_hamiltonian(params: &ModelParams, layout: &HilbertLayout) -> Result<Operator> {
    let mut h = Operator::zeros(layout.clone());
    for i in require_nodes(layout)? {
        let (dot, cav) = (dot_label(i), cavity_label(i));
        let dot_dim = layout.dim_of(&dot)?;
        if dot_dim != EFFECTIVE_DOT_DIM {
            return Err(Error::DimensionMismatch {
                expected: EFFECTIVE_DOT_DIM,
                found: dot_dim,
            });
        }
        let lambda = params.node(i)?.lambda;
        if lambda == 0.0 {
            continue;
        }
        let sy = embed(&sigma_y(EFFECTIVE_DOT_DIM)?, &dot, layout)?;
        let x = embed(&quadrature_op(layout.dim_of(&cav)?)?, &cav, layout)?;
        h = &h + &sy.matmul(&x).scale_re(lambda);
    }
    Ok(h)
}

/// Four-level dot coupled to its cavity, in the frame where the trion
/// detunings are static energies:
///
/// `H = D+|T+><T+| + D-|T-><T-| + [W+|X+><T+| + W-|X-><T-|
///      + g+|X-><T+|a† + g-|X+><T-|a† + h.c.]`.
pub fn build_full_hamiltonian(params: &ModelParams, layout: &HilbertLayout) -> Result<Operator> {
    let nodes = require_nodes(layout)?;
    if nodes.len() != 1 || layout.factors().len() != 2 {
        return Err(Error::Structure(format!(
            "full model needs a single-node layout (dot:4, cav:N), got {layout}"
        )));
    }
    let i = nodes[0];
    let (dot, cav) = (dot_label(i), cavity_label(i));
    let dot_dim = layout.dim_of(&dot)?;
    if dot_dim != FULL_DOT_DIM {
        return Err(Error::DimensionMismatch {
            expected: FULL_DOT_DIM,
            found: dot_dim,
        });
    }
    let p = params.node(i)?;
    if p.delta_plus <= 0.0 || p.delta_minus <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "full model needs positive detunings, got delta_plus = {}, delta_minus = {}",
            p.delta_plus, p.delta_minus
        )));
    }
    let lift = |op: Operator| embed(&op, &dot, layout);
    let tr = |to, from| dot_transition(to, from, FULL_DOT_DIM);
    let ad = embed(&annihilation_op(layout.dim_of(&cav)?)?.adjoint(), &cav, layout)?;

    let diag = &lift(dot_projector(DotLevel::TPlus, FULL_DOT_DIM)?)?.scale_re(p.delta_plus)
        + &lift(dot_projector(DotLevel::TMinus, FULL_DOT_DIM)?)?.scale_re(p.delta_minus);
    let lasers = &lift(tr(DotLevel::XPlus, DotLevel::TPlus)?)?.scale_re(p.omega_plus)
        + &lift(tr(DotLevel::XMinus, DotLevel::TMinus)?)?.scale_re(p.omega_minus);
    let cavity = &lift(tr(DotLevel::XMinus, DotLevel::TPlus)?)?.matmul(&ad).scale_re(p.g_plus)
        + &lift(tr(DotLevel::XPlus, DotLevel::TMinus)?)?.matmul(&ad).scale_re(p.g_minus);
    let coupling = &lasers + &cavity;
    Ok(&diag + &(&coupling + &coupling.adjoint()))
}

/// Closed-form cavity amplitude on the `sigma_y = s` branch from vacuum:
/// `alpha(t) = -i s (2 lambda / kappa)(1 - exp(-kappa t / 2))`, reducing to
/// `-i s lambda t` at `kappa = 0`.
pub fn branch_amplitude_analytic(lambda: f64, kappa: f64, t: f64, branch_sign: i8) -> C64 {
    let s = if branch_sign >= 0 { 1.0 } else { -1.0 };
    let mag = if kappa == 0.0 {
        lambda * t
    } else {
        -(2.0 * lambda / kappa) * (-0.5 * kappa * t).exp_m1()
    };
    C64::new(0.0, -s * mag)
}

/// `∫_0^t kappa |alpha(s)|^2 ds`, the expected photon count leaked by one
/// cavity on either branch.
pub fn branch_emission_analytic(lambda: f64, kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    let r = 2.0 * lambda / kappa;
    let e1 = -(-0.5 * kappa * t).exp_m1();
    let e2 = -(-kappa * t).exp_m1();
    kappa * r * r * (t - 4.0 * e1 / kappa + e2 / kappa)
}
