use nalgebra::DVector;

use crate::dynamics::Click;
use crate::error::{Error, Result};
use crate::model::{
    branch_amplitude_analytic, branch_emission_analytic, two_node_layout, y_state, ChannelLabel,
    ModelParams, NodeParams,
};
use crate::qcore::{coherent_state, StateVector, C64};

use super::schedule::ProtocolSchedule;

fn require_closed_dots(params: &ModelParams) -> Result<()> {
    if params.nodes.iter().any(|n| n.gamma != 0.0) {
        return Err(Error::InvalidParam(format!(
            "analytic states need gamma_1 = gamma_2 = 0, got {} and {}",
            params.nodes[0].gamma, params.nodes[1].gamma
        )));
    }
    Ok(())
}

/// Branch amplitude of a node at time `t` of a drive-then-ring-down
/// schedule: the driven closed form up to `t_drive`, then free decay.
pub fn scheduled_amplitude(node: &NodeParams, schedule: &ProtocolSchedule, t: f64, sign: i8) -> C64 {
    if t <= schedule.t_drive {
        return branch_amplitude_analytic(node.lambda, node.kappa, t, sign);
    }
    let a = branch_amplitude_analytic(node.lambda, node.kappa, schedule.t_drive, sign);
    a * (-0.5 * node.kappa * (t - schedule.t_drive)).exp()
}

/// `sum_{s1,s2} w(s1,s2) |y_s1 y_s2>|alpha_1,s1>|alpha_2,s2>`, normalized.
fn branch_state(
    amps: [[C64; 2]; 2],
    weights: [[C64; 2]; 2],
    n_fock: usize,
) -> Result<StateVector> {
    let signs = [1i8, -1];
    let mut v = DVector::zeros(4 * n_fock * n_fock);
    for (i1, &s1) in signs.iter().enumerate() {
        let c1 = coherent_state(amps[0][i1], n_fock)?.state.into_amplitudes();
        for (i2, &s2) in signs.iter().enumerate() {
            let w = weights[i1][i2];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            let c2 = coherent_state(amps[1][i2], n_fock)?.state.into_amplitudes();
            let term = y_state(s1, 2)?.kronecker(&y_state(s2, 2)?).kronecker(&c1).kronecker(&c2);
            v += term * w;
        }
    }
    StateVector::unnormalized(two_node_layout(n_fock), v)?.normalize()
}

/// No-click state of the two nodes after driving for `t` from
/// `|X->|X->|0>|0>` with `Gamma_1 = Gamma_2 = 0`.
///
/// The four `sigma_y` branches carry coherent fields `alpha_i,s(t)`; each
/// branch is weighted by its no-click amplitude `exp(-(N_1 + N_2)/2)`,
/// which has the same value on every branch.
pub fn analytic_joint_state(params: &ModelParams, t: f64, n_fock: usize) -> Result<StateVector> {
    require_closed_dots(params)?;
    let [n1, n2] = &params.nodes;
    let amp = |n: &NodeParams, s| branch_amplitude_analytic(n.lambda, n.kappa, t, s);
    let decay = (-0.5
        * (branch_emission_analytic(n1.lambda, n1.kappa, t) + branch_emission_analytic(n2.lambda, n2.kappa, t)))
    .exp();
    let w = C64::new(0.5 * decay, 0.0);
    branch_state(
        [[amp(n1, 1), amp(n1, -1)], [amp(n2, 1), amp(n2, -1)]],
        [[w; 2]; 2],
        n_fock,
    )
}

/// Two-node state at time `t` of `schedule` conditioned on the detector
/// clicks `clicks` (all at times `<= t`), with `Gamma_1 = Gamma_2 = 0`.
///
/// A click at `c` multiplies branch `(s1, s2)` by
/// `-i(sqrt(k1) alpha_1,s1 + sqrt(k2) alpha_2,s2)/sqrt 2` at the click time,
/// a click at `d` by the difference; between clicks the branch weights
/// change by a common factor only.
pub fn conditional_joint_state(
    params: &ModelParams,
    schedule: &ProtocolSchedule,
    clicks: &[Click],
    t: f64,
    n_fock: usize,
) -> Result<StateVector> {
    require_closed_dots(params)?;
    let [n1, n2] = &params.nodes;
    let (k1, k2) = (n1.kappa.sqrt(), n2.kappa.sqrt());
    let signs = [1i8, -1];
    let pre = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
    let mut weights = [[C64::new(0.5, 0.0); 2]; 2];
    for click in clicks {
        if click.t > t {
            return Err(Error::InvalidParam(format!(
                "click at t = {} lies after t = {t}",
                click.t
            )));
        }
        let sign = match click.channel {
            ChannelLabel::C => 1.0,
            ChannelLabel::D => -1.0,
            other => {
                return Err(Error::InvalidParam(format!(
                    "channel {other} is not a beamsplitter port"
                )))
            }
        };
        for (i1, &s1) in signs.iter().enumerate() {
            for (i2, &s2) in signs.iter().enumerate() {
                let a1 = scheduled_amplitude(n1, schedule, click.t, s1);
                let a2 = scheduled_amplitude(n2, schedule, click.t, s2);
                weights[i1][i2] *= pre * (a1 * k1 + a2 * (sign * k2));
            }
        }
        let scale = weights.iter().flatten().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if scale == 0.0 {
            return Err(Error::Integrity(format!(
                "click at t = {} has zero probability",
                click.t
            )));
        }
        for w in weights.iter_mut().flatten() {
            *w /= scale;
        }
    }
    let amp = |n: &NodeParams, s| scheduled_amplitude(n, schedule, t, s);
    branch_state(
        [[amp(n1, 1), amp(n1, -1)], [amp(n2, 1), amp(n2, -1)]],
        weights,
        n_fock,
    )
}

/// Unconditional coherence `|<y+|rho_dot|y->| / |<y+|rho_dot(0)|y->|` of one
/// node with `Gamma = 0`: `exp(-2|alpha|^2 - 2N)`, from the cavity-field
/// overlap and the emitted-field overlap.
pub fn dot_coherence_analytic(lambda: f64, kappa: f64, t: f64) -> f64 {
    let a = branch_amplitude_analytic(lambda, kappa, t, 1).norm_sqr();
    (-2.0 * a - 2.0 * branch_emission_analytic(lambda, kappa, t)).exp()
}
