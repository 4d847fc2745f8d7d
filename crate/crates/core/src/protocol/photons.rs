use crate::dynamics::{
    ensemble_density, propagate_master_phases, MasterRun, Observables, Phase, TimeSeries,
};
use crate::error::{Error, Result};
use crate::model::{cavity_label, dot_label, level_state, DotLevel, LindbladModel, ModelParams};
use crate::qcore::{
    annihilation_op, embed, number_op, trace_distance, DensityMatrix, Operator, StateVector,
};

use super::herald::HeraldExperiment;
use super::schedule::{fock_for, ProtocolSchedule};

/// Tolerated negative excursion of a detection rate.
pub const RATE_TOLERANCE: f64 = 1e-12;

/// `Tr(L rho L†)`, clamped at zero within [`RATE_TOLERANCE`].
pub fn detection_rate(rho: &DensityMatrix, jump_op: &Operator) -> Result<f64> {
    if rho.layout().dims() != jump_op.layout().dims() {
        return Err(Error::Structure(format!(
            "jump operator layout {} differs from state layout {}",
            jump_op.layout(),
            rho.layout()
        )));
    }
    let r = jump_op.adjoint().matmul(jump_op).trace_product(rho.entries()).re;
    if r < -RATE_TOLERANCE || !r.is_finite() {
        return Err(Error::Integrity(format!("detection rate {r:.3e} is negative")));
    }
    Ok(r.max(0.0))
}

/// Drive and ring-down phases of one effective node.
fn node_phases(params: &ModelParams, node: usize, n_fock: usize, schedule: &ProtocolSchedule) -> Result<Vec<Phase>> {
    let model = LindbladModel::single_node(params, node, n_fock)?;
    let mut phases = vec![Phase::new(model.clone(), schedule.t_drive)];
    if schedule.t_ringdown > 0.0 {
        phases.push(Phase::new(model.free_decay(), schedule.t_ringdown));
    }
    Ok(phases)
}

/// Master-equation run of one node from `|X->|0>`, integrating the photon
/// flux `kappa n`.
fn node_run(
    params: &ModelParams,
    node: usize,
    n_fock: usize,
    schedule: &ProtocolSchedule,
    snapshots: bool,
) -> Result<MasterRun> {
    let phases = node_phases(params, node, n_fock, schedule)?;
    let layout = phases[0].model.layout().clone();
    let psi0 = StateVector::from_amplitudes(
        layout.clone(),
        level_state(DotLevel::XMinus, 2)?.kronecker(&crate::model::fock_vector(0, n_fock)),
    )?;
    let kappa = params.node(node)?.kappa;
    let flux = embed(&number_op(n_fock)?, &cavity_label(node), &layout)?.scale_re(kappa);
    let mut obs = Observables::default().integrate("emitted", flux).with_positivity();
    if snapshots {
        obs = obs.with_snapshots();
    }
    propagate_master_phases(&phases, &psi0.to_density(), &schedule.options(), &obs)
}

/// Mean number of photons leaked into the detectors over the schedule.
///
/// Without conditioning on clicks the beamsplitter dissipators sum to the
/// two cavity dissipators and the two nodes evolve independently, so each
/// node is integrated on its own. Columns: `lambda_t`, `N` (mean per
/// detector, equal to the mean per cavity for identical nodes), `N_total`
/// (both detectors), `N_1`, `N_2`, and the integrity columns `trace_err`,
/// `herm_defect` (worst node) and `min_eig` (lowest node).
pub fn mean_detected_photons(params: &ModelParams, schedule: &ProtocolSchedule) -> Result<TimeSeries> {
    params.validate()?;
    schedule.validate()?;
    let n_fock = fock_for(params, schedule.t_drive);
    let r1 = node_run(params, 1, n_fock, schedule, false)?;
    let r2 = node_run(params, 2, n_fock, schedule, false)?;
    let n1 = r1.series.require("emitted")?;
    let n2 = r2.series.require("emitted")?;
    let total: Vec<f64> = n1.iter().zip(n2).map(|(a, b)| a + b).collect();
    let lambda = params.node(1)?.lambda;
    let t = r1.series.t().to_vec();
    let mut s = TimeSeries::new(t.clone());
    s.push_column("lambda_t", t.iter().map(|t| lambda * t).collect())?;
    s.push_column("N", total.iter().map(|n| 0.5 * n).collect())?;
    s.push_column("N_total", total)?;
    s.push_column("N_1", n1.to_vec())?;
    s.push_column("N_2", n2.to_vec())?;
    let worst = |name: &str, pick: fn(f64, f64) -> f64| -> Result<Vec<f64>> {
        let a = r1.series.require(name)?;
        let b = r2.series.require(name)?;
        Ok(a.iter().zip(b).map(|(x, y)| pick(*x, *y)).collect())
    };
    s.push_column("trace_err", worst("trace_err", f64::max)?)?;
    s.push_column("herm_defect", worst("herm_defect", f64::max)?)?;
    s.push_column("min_eig", worst("min_eig", f64::min)?)?;
    Ok(s)
}

/// Unconditional two-node state `rho_1 ⊗ rho_2` on the two-node layout at
/// every recorded time of the schedule.
pub fn unconditional_states(params: &ModelParams, schedule: &ProtocolSchedule) -> Result<(Vec<f64>, Vec<DensityMatrix>)> {
    params.validate()?;
    schedule.validate()?;
    let n_fock = fock_for(params, schedule.t_drive);
    let r1 = node_run(params, 1, n_fock, schedule, true)?;
    let r2 = node_run(params, 2, n_fock, schedule, true)?;
    let order = [dot_label(1), dot_label(2), cavity_label(1), cavity_label(2)];
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let states = r1
        .snapshots
        .iter()
        .zip(&r2.snapshots)
        .map(|(a, b)| a.tensor(b)?.permuted(&order))
        .collect::<Result<_>>()?;
    Ok((r1.series.t().to_vec(), states))
}

/// Trace distance between the trajectory-ensemble density and the master
/// equation at every recorded time. Column: `trace_distance`.
pub fn unravelling_distance(
    params: &ModelParams,
    schedule: &ProtocolSchedule,
    n_traj: usize,
    master_seed: u64,
) -> Result<TimeSeries> {
    let exp = HeraldExperiment::new(params, schedule)?;
    let (t, exact) = unconditional_states(params, schedule)?;
    let sampled = ensemble_density(exp.phases(), exp.initial_state(), exp.options(), n_traj, master_seed)?;
    if sampled.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            found: sampled.len(),
        });
    }
    let d = exact
        .iter()
        .zip(&sampled)
        .map(|(a, b)| trace_distance(a, b))
        .collect::<Result<_>>()?;
    let mut s = TimeSeries::new(t);
    s.push_column("trace_distance", d)?;
    Ok(s)
}

/// Cavity field `<a_i>` of a state, used by tests and diagnostics.
pub fn mean_field(rho: &DensityMatrix, node: usize) -> Result<num_complex::Complex64> {
    let cav = cavity_label(node);
    let a = embed(&annihilation_op(rho.layout().dim_of(&cav)?)?, &cav, rho.layout())?;
    crate::qcore::expectation(&a, rho)
}
