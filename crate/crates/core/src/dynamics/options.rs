use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LindbladModel;

/// Largest allowed `dt * ||H||`, with `||H||` bounded by the largest
/// absolute row sum.
pub const STEP_LIMIT: f64 = 0.05;
/// Largest allowed `dt * ||(1/2) sum L†L||`.
pub const DAMPING_LIMIT: f64 = 0.5;

/// Integrator choice. Only fixed-step fourth-order Runge–Kutta exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepRule {
    FixedRk4,
}

/// Time grid and tolerances shared by the master-equation and trajectory
/// integrators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Record every `record_stride` steps (the grid always includes `t = 0`).
    pub record_stride: usize,
    pub step_rule: StepRule,
    pub tolerance_trace: f64,
}

impl IntegrationOptions {
    pub fn new(dt: f64, t_max: f64, record_stride: usize) -> Self {
        IntegrationOptions {
            dt,
            t_max,
            record_stride,
            step_rule: StepRule::FixedRk4,
            tolerance_trace: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParam(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParam("record_stride must be >= 1".into()));
        }
        steps_for(self.t_max, self.dt)?;
        Ok(())
    }

    /// Same grid with `dt` halved and the stride doubled, so recorded times
    /// coincide.
    pub fn halved(&self) -> Self {
        IntegrationOptions {
            dt: 0.5 * self.dt,
            record_stride: 2 * self.record_stride,
            ..self.clone()
        }
    }
}

/// Number of steps covering `duration`; it must be an integer multiple of `dt`.
pub fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    let n = duration / dt;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::InvalidParam(format!(
            "duration {duration} is not a multiple of dt = {dt}"
        )));
    }
    Ok(rounded as usize)
}

/// Enforces the step rule on a model.
pub fn check_step_rule(model: &LindbladModel, dt: f64) -> Result<()> {
    let bound = model.hamiltonian().row_abs_sum_bound();
    if dt * bound > STEP_LIMIT {
        return Err(Error::StepRule {
            dt,
            bound,
            product: dt * bound,
            limit: STEP_LIMIT,
        });
    }
    let damping = 0.5 * model.damping_operator().row_abs_sum_bound();
    if dt * damping > DAMPING_LIMIT {
        return Err(Error::StepRule {
            dt,
            bound: damping,
            product: dt * damping,
            limit: DAMPING_LIMIT,
        });
    }
    Ok(())
}

/// Largest `dt` that satisfies the step rule for `model`, rounded down to
/// `1 / quantum` so that common durations stay whole multiples.
pub fn max_dt(model: &LindbladModel, quantum: f64) -> f64 {
    let bound = model.hamiltonian().row_abs_sum_bound();
    let damping = 0.5 * model.damping_operator().row_abs_sum_bound();
    let limit = (STEP_LIMIT / bound.max(f64::MIN_POSITIVE)).min(DAMPING_LIMIT / damping.max(f64::MIN_POSITIVE));
    ((limit * quantum).floor() / quantum).max(1.0 / quantum)
}

/// One leg of a piecewise-constant schedule.
#[derive(Debug, Clone)]
pub struct Phase {
    pub model: LindbladModel,
    pub duration: f64,
}

impl Phase {
    pub fn new(model: LindbladModel, duration: f64) -> Self {
        Phase { model, duration }
    }
}

/// Validates a schedule against the options and returns per-phase step counts.
pub(crate) fn plan(phases: &[Phase], opts: &IntegrationOptions) -> Result<Vec<usize>> {
    opts.validate()?;
    if phases.is_empty() {
        return Err(Error::InvalidParam("schedule has no phases".into()));
    }
    let layout = phases[0].model.layout();
    let mut steps = Vec::with_capacity(phases.len());
    for p in phases {
        if p.model.layout().dims() != layout.dims() {
            return Err(Error::Structure("phases use different layouts".into()));
        }
        check_step_rule(&p.model, opts.dt)?;
        steps.push(steps_for(p.duration, opts.dt)?);
    }
    let total: f64 = phases.iter().map(|p| p.duration).sum();
    if (total - opts.t_max).abs() > 1e-9 * total.max(1.0) {
        return Err(Error::InvalidParam(format!(
            "phase durations sum to {total}, t_max is {}",
            opts.t_max
        )));
    }
    Ok(steps)
}

/// Recorded times for a schedule with `total_steps` steps.
pub(crate) fn record_grid(total_steps: usize, opts: &IntegrationOptions) -> Vec<f64> {
    (0..=total_steps)
        .step_by(opts.record_stride)
        .map(|k| k as f64 * opts.dt)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn step_rule_enforced() {
        let m = LindbladModel::two_node(&ModelParams::symmetric(1.0, 1.0, 0.0), 19).unwrap();
        assert!(check_step_rule(&m, 0.0025).is_ok());
        assert!(matches!(check_step_rule(&m, 0.01), Err(Error::StepRule { .. })));
        let dt = max_dt(&m, 4000.0);
        assert!(check_step_rule(&m, dt).is_ok());
    }

    #[test]
    fn durations_must_fit_the_grid() {
        assert_eq!(steps_for(2.0, 0.0025).unwrap(), 800);
        assert!(steps_for(1.0, 0.3).is_err());
        let o = IntegrationOptions::new(0.01, 1.0, 10);
        assert_eq!(record_grid(100, &o).len(), 11);
        assert_eq!(record_grid(200, &o.halved()).len(), 11);
    }
}
