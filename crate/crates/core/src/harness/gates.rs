use crate::dynamics::{check_step_rule, TimeSeries, HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::{LindbladModel, ModelParams};
use crate::protocol::{
    fock_for, mean_detected_photons, trion_population, ProtocolSchedule, TrionStart, FULL_MODEL_FOCK,
};

use super::output::Check;

/// Trace error accepted on every recorded point of a figure run.
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// `max|a - b| / max|a|`; zero when both vanish.
pub fn relative_change(base: &[f64], other: &[f64]) -> f64 {
    let scale = base.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = base.iter().zip(other).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Column `name` of `other` sampled on the grid of `base`.
fn on_grid(base: &TimeSeries, other: &TimeSeries, name: &str) -> Result<Vec<f64>> {
    let col = other.require(name)?;
    let mut k = 0;
    base.t()
        .iter()
        .map(|&t| {
            while k < other.len() && other.t()[k] < t - 1e-9 * t.max(1.0) {
                k += 1;
            }
            match other.t().get(k) {
                Some(&u) if (u - t).abs() <= 1e-9 * t.max(1.0) => Ok(col[k]),
                _ => Err(Error::Structure(format!("refined run has no record at t = {t}"))),
            }
        })
        .collect()
}

/// Gate checks comparing `refined` against `base` on the columns `names`.
fn compare(label: &str, base: &TimeSeries, refined: &TimeSeries, names: &[&str], tol: f64) -> Result<Vec<Check>> {
    names
        .iter()
        .map(|n| {
            let fine = on_grid(base, refined, n)?;
            Ok(Check::new(format!("{label}: {n}"), relative_change(base.require(n)?, &fine), "<", tol))
        })
        .collect()
}

/// Fails with the integrity error class if any recorded point of a
/// master-equation series breaks the trace, Hermiticity or positivity limits.
pub fn check_integrity(series: &TimeSeries, label: &str) -> Result<()> {
    let worst = |name: &str, f: fn(f64, f64) -> f64, init: f64| series.column(name).map(|c| c.iter().copied().fold(init, f));
    if let Some(e) = worst("trace_err", f64::max, 0.0) {
        if !(e < TRACE_TOLERANCE) {
            return Err(Error::Integrity(format!("{label}: trace error {e:.3e}")));
        }
    }
    if let Some(h) = worst("herm_defect", f64::max, 0.0) {
        if !(h < HERMITICITY_TOLERANCE) {
            return Err(Error::Integrity(format!("{label}: Hermiticity defect {h:.3e}")));
        }
    }
    if let Some(m) = worst("min_eig", f64::min, 0.0) {
        if !(m >= -POSITIVITY_TOLERANCE) {
            return Err(Error::Integrity(format!("{label}: minimum eigenvalue {m:.3e}")));
        }
    }
    Ok(())
}

/// Photon-count gates of the effective model: the step halved, and the Fock
/// cutoff doubled.
pub fn effective_gates(params: &ModelParams, schedule: &ProtocolSchedule, tol: f64, label: &str) -> Result<Vec<Check>> {
    let names = ["N_1", "N_2"];
    let base = mean_detected_photons(params, schedule)?;
    check_integrity(&base, label)?;
    let fine = mean_detected_photons(params, &schedule.halved())?;
    check_integrity(&fine, label)?;
    let mut wide = params.clone();
    wide.n_fock = Some(2 * fock_for(params, schedule.t_drive));
    let big = mean_detected_photons(&wide, schedule)?;
    check_integrity(&big, label)?;
    let mut out = compare(&format!("{label} dt/2"), &base, &fine, &names, tol)?;
    out.extend(compare(&format!("{label} 2 N_F"), &base, &big, &names, tol)?);
    Ok(out)
}

/// Four-level gates on the first `window` time units of the run.
pub fn trion_gates(
    params: &ModelParams,
    schedule: &ProtocolSchedule,
    start: TrionStart,
    window: f64,
    tol: f64,
) -> Result<Vec<Check>> {
    let names = ["P_trion", "n_cav", "P_X_minus"];
    let every = schedule.record_every();
    let w = crate::protocol::schedule::round_up(window.min(schedule.t_drive), every);
    let short = ProtocolSchedule::new(w, 0.0, schedule.dt, schedule.record_stride);
    let base = trion_population(params, &short, start)?;
    check_integrity(&base, "fig4 gate")?;
    let fine = trion_population(params, &short.halved(), start)?;
    check_integrity(&fine, "fig4 gate")?;
    let n = params.n_fock.unwrap_or(FULL_MODEL_FOCK);
    let mut wide = params.clone();
    wide.n_fock = Some(2 * n);
    let model = LindbladModel::full_single_node(&wide, 2 * n)?;
    let mut wide_sched = short.clone();
    for _ in 0..8 {
        if check_step_rule(&model, wide_sched.dt).is_ok() {
            break;
        }
        wide_sched = wide_sched.halved();
    }
    let big = trion_population(&wide, &wide_sched, start)?;
    check_integrity(&big, "fig4 gate")?;
    let same_step = if wide_sched == short {
        base.clone()
    } else if wide_sched == short.halved() {
        fine.clone()
    } else {
        trion_population(params, &wide_sched, start)?
    };
    let mut out = compare("fig4 dt/2", &base, &fine, &names, tol)?;
    out.extend(compare("fig4 2 N_F", &same_step, &big, &names, tol)?);
    Ok(out)
}

/// The convergence error class if any gate failed.
pub fn require_pass(gates: &[Check]) -> Result<()> {
    let failed: Vec<String> = gates.iter().filter(|g| !g.pass).map(Check::line).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Convergence(failed.join("; ")))
    }
}
