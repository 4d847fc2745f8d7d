use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{propagate_master_phases, Observables, Phase, TimeSeries};
use crate::error::{Error, Result};
use crate::model::{
    cavity_label, dot_label, dot_projector, fock_vector, single_node_layout, DotLevel,
    LindbladModel, ModelParams, NodeParams, FULL_DOT_DIM,
};
use crate::qcore::{embed, number_op, StateVector, C64};

use super::schedule::{ProtocolSchedule, FULL_MODEL_FOCK};

/// Initial dot state of a four-level run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrionStart {
    /// `|X->|0>`, lasers switched on suddenly.
    Bare,
    /// Laser-dressed state connected to `|X->`, cavity in vacuum.
    Dressed,
}

/// Eigenvector of the laser-only dot Hamiltonian with the largest `|X->`
/// weight, tensored with the cavity vacuum.
pub fn dressed_ground(params: &ModelParams, n_fock: usize) -> Result<StateVector> {
    let p = params.node(1)?;
    let (xm, xp, tm, tp) = (
        DotLevel::XMinus.index(),
        DotLevel::XPlus.index(),
        DotLevel::TMinus.index(),
        DotLevel::TPlus.index(),
    );
    let mut h = DMatrix::<f64>::zeros(FULL_DOT_DIM, FULL_DOT_DIM);
    h[(tp, tp)] = p.delta_plus;
    h[(tm, tm)] = p.delta_minus;
    h[(xp, tp)] = p.omega_plus;
    h[(tp, xp)] = p.omega_plus;
    h[(xm, tm)] = p.omega_minus;
    h[(tm, xm)] = p.omega_minus;
    let eig = h.symmetric_eigen();
    let k = (0..FULL_DOT_DIM)
        .max_by(|&a, &b| eig.eigenvectors[(xm, a)].abs().total_cmp(&eig.eigenvectors[(xm, b)].abs()))
        .expect("four eigenvectors");
    let mut v = eig.eigenvectors.column(k).into_owned();
    if v[xm] < 0.0 {
        v = -v;
    }
    let dot = v.map(|x| C64::new(x, 0.0));
    StateVector::from_amplitudes(
        single_node_layout(1, FULL_DOT_DIM, n_fock),
        dot.kronecker(&fock_vector(0, n_fock)),
    )
}

/// Second-order trion admixture `(W+/D+)^2 + (W-/D-)^2` before the cavity
/// builds up.
pub fn trion_admixture_bound(node: &NodeParams) -> f64 {
    (node.omega_plus / node.delta_plus).powi(2) + (node.omega_minus / node.delta_minus).powi(2)
}

/// Loss-rate estimates `Gamma_T W g / D^2` of the two Raman branches
/// (plus, minus), in reduced units.
pub fn trion_rate_estimates(params: &ModelParams) -> Result<(f64, f64)> {
    let n = params.node(1)?;
    Ok((
        params.gamma_t * n.omega_plus * n.g_plus / n.delta_plus.powi(2),
        params.gamma_t * n.omega_minus * n.g_minus / n.delta_minus.powi(2),
    ))
}

/// Master-equation run of the four-level node.
///
/// Columns: `P_trion`, `P_T_plus`, `P_T_minus`, `P_X_minus`, `P_X_plus`,
/// `n_cav`, `trion_loss` (`Gamma_T ∫ P_trion`), the integrity columns,
/// `t_ns`, `lambda_t` and `survival` (`exp(-trion_loss)`). The ring-down, if
/// any, switches the lasers off.
pub fn trion_population(params: &ModelParams, schedule: &ProtocolSchedule, start: TrionStart) -> Result<TimeSeries> {
    params.validate()?;
    schedule.validate()?;
    let n_fock = params.n_fock.unwrap_or(FULL_MODEL_FOCK);
    let model = LindbladModel::full_single_node(params, n_fock)?;
    let mut phases = vec![Phase::new(model.clone(), schedule.t_drive)];
    if schedule.t_ringdown > 0.0 {
        let mut dark = params.clone();
        dark.nodes[0].omega_plus = 0.0;
        dark.nodes[0].omega_minus = 0.0;
        phases.push(Phase::new(
            LindbladModel::full_single_node(&dark, n_fock)?,
            schedule.t_ringdown,
        ));
    }
    let layout = model.layout().clone();
    let dot = dot_label(1);
    let proj = |level| embed(&dot_projector(level, FULL_DOT_DIM)?, &dot, &layout);
    let (tp, tm) = (proj(DotLevel::TPlus)?, proj(DotLevel::TMinus)?);
    let trion = &tp + &tm;
    let obs = Observables::default()
        .expect("P_trion", trion.clone())
        .expect("P_T_plus", tp)
        .expect("P_T_minus", tm)
        .expect("P_X_minus", proj(DotLevel::XMinus)?)
        .expect("P_X_plus", proj(DotLevel::XPlus)?)
        .expect("n_cav", embed(&number_op(n_fock)?, &cavity_label(1), &layout)?)
        .integrate("trion_loss", trion.scale_re(params.gamma_t))
        .with_positivity();
    let psi0 = match start {
        TrionStart::Bare => StateVector::from_amplitudes(
            layout.clone(),
            crate::model::level_state(DotLevel::XMinus, FULL_DOT_DIM)?.kronecker(&fock_vector(0, n_fock)),
        )?,
        TrionStart::Dressed => dressed_ground(params, n_fock)?,
    };
    let run = propagate_master_phases(&phases, &psi0.to_density(), &schedule.options(), &obs)?;
    let mut series = run.series;
    let unit_ns = params.time_unit_s() * 1e9;
    let lambda = params.node(1)?.lambda;
    let t = series.t().to_vec();
    let survival = series.require("trion_loss")?.iter().map(|l| (-l).exp()).collect();
    series.push_column("t_ns", t.iter().map(|t| t * unit_ns).collect())?;
    series.push_column("lambda_t", t.iter().map(|t| lambda * t).collect())?;
    series.push_column("survival", survival)?;
    Ok(series)
}

/// Summary of a four-level run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrionFit {
    /// Loss rate from a log-linear fit of `survival`, reduced units.
    pub rate: f64,
    /// Same rate as a cyclic frequency in MHz (`rate = 2pi x rate_mhz`).
    pub rate_mhz: f64,
    /// Largest `P_trion` with `t <= early_until`.
    pub p_trion_early_max: f64,
    pub p_trion_max: f64,
    pub early_until: f64,
}

/// Least-squares slope of `ln survival` against `t`, and trion maxima.
pub fn fit_trion_loss(params: &ModelParams, series: &TimeSeries, early_until: f64) -> Result<TrionFit> {
    let t = series.t();
    let s = series.require("survival")?;
    let p = series.require("P_trion")?;
    if t.len() < 2 {
        return Err(Error::InvalidParam("need at least two points to fit".into()));
    }
    let y: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let rate = -sxy / sxx;
    let early = t
        .iter()
        .zip(p)
        .filter(|(t, _)| **t <= early_until)
        .map(|(_, p)| *p)
        .fold(0.0, f64::max);
    Ok(TrionFit {
        rate,
        rate_mhz: params.rate_to_mhz(rate),
        p_trion_early_max: early,
        p_trion_max: p.iter().copied().fold(0.0, f64::max),
        early_until,
    })
}
