use serde::Serialize;

use crate::dynamics::{check_step_rule, steps_for, IntegrationOptions};
use crate::error::{Error, Result};
use crate::model::{branch_amplitude_analytic, LindbladModel, ModelParams};
use crate::qcore::fock_cutoff;

/// Default step for the effective models.
pub const DEFAULT_DT: f64 = 0.0025;
/// Default spacing of recorded points.
pub const DEFAULT_RECORD_EVERY: f64 = 0.05;
/// Default ring-down length in units of the slowest cavity lifetime.
pub const RINGDOWN_LIFETIMES: f64 = 8.0;
/// Default step for the four-level model.
pub const FULL_MODEL_DT: f64 = 0.0005;
/// Default Fock cutoff for the four-level model.
pub const FULL_MODEL_FOCK: usize = 13;

/// Drive-then-ring-down timing of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSchedule {
    /// Lasers on, `H_eff` active.
    pub t_drive: f64,
    /// Couplings off, cavities decay.
    pub t_ringdown: f64,
    pub dt: f64,
    pub record_stride: usize,
}

impl ProtocolSchedule {
    pub fn new(t_drive: f64, t_ringdown: f64, dt: f64, record_stride: usize) -> Self {
        ProtocolSchedule {
            t_drive,
            t_ringdown,
            dt,
            record_stride,
        }
    }

    /// Defaults for the two-node effective model: ring-down of
    /// `8 / min(kappa)` rounded up to the record spacing, and the default step
    /// halved until the step rule holds at the resolved Fock cutoff.
    pub fn for_params(params: &ModelParams, t_drive: f64) -> Result<Self> {
        params.validate()?;
        let n_fock = fock_for(params, t_drive);
        let model = LindbladModel::two_node(params, n_fock)?;
        let mut dt = DEFAULT_DT;
        for _ in 0..8 {
            if check_step_rule(&model, dt).is_ok() {
                break;
            }
            dt *= 0.5;
        }
        check_step_rule(&model, dt)?;
        let stride = ((DEFAULT_RECORD_EVERY / dt).round() as usize).max(1);
        let kappa_min = params.nodes.iter().map(|n| n.kappa).fold(f64::INFINITY, f64::min);
        let t_ringdown = if kappa_min > 0.0 {
            round_up(RINGDOWN_LIFETIMES / kappa_min, dt * stride as f64)
        } else {
            0.0
        };
        Ok(ProtocolSchedule::new(t_drive, t_ringdown, dt, stride))
    }

    /// Single run of length `t_max` for the four-level model.
    pub fn full_model(t_max: f64) -> Self {
        ProtocolSchedule::new(t_max, 0.0, FULL_MODEL_DT, 200)
    }

    pub fn with_drive(&self, t_drive: f64) -> Self {
        ProtocolSchedule {
            t_drive,
            ..self.clone()
        }
    }

    pub fn with_ringdown(&self, t_ringdown: f64) -> Self {
        ProtocolSchedule {
            t_ringdown,
            ..self.clone()
        }
    }

    pub fn t_total(&self) -> f64 {
        self.t_drive + self.t_ringdown
    }

    /// Spacing of recorded points.
    pub fn record_every(&self) -> f64 {
        self.dt * self.record_stride as f64
    }

    pub fn options(&self) -> IntegrationOptions {
        IntegrationOptions::new(self.dt, self.t_total(), self.record_stride)
    }

    /// Same schedule with the step halved and the stride doubled.
    pub fn halved(&self) -> Self {
        ProtocolSchedule {
            dt: 0.5 * self.dt,
            record_stride: 2 * self.record_stride,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_drive", self.t_drive), ("t_ringdown", self.t_ringdown)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.options().validate()?;
        steps_for(self.t_drive, self.dt)?;
        steps_for(self.t_ringdown, self.dt)?;
        Ok(())
    }
}

/// Smallest multiple of `quantum` that is at least `x`.
pub(crate) fn round_up(x: f64, quantum: f64) -> f64 {
    (x / quantum - 1e-9).ceil().max(0.0) * quantum
}

/// Fock cutoff for a drive of length `t_drive`: the configured value, or
/// the default policy at the largest branch amplitude reached.
pub fn fock_for(params: &ModelParams, t_drive: f64) -> usize {
    params.n_fock.unwrap_or_else(|| {
        let alpha_max = params
            .nodes
            .iter()
            .map(|n| branch_amplitude_analytic(n.lambda, n.kappa, t_drive, 1).norm())
            .fold(0.0, f64::max);
        fock_cutoff(alpha_max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_for_symmetric_nodes() {
        let p = ModelParams::symmetric(1.0, 1.0, 0.05);
        let s = ProtocolSchedule::for_params(&p, 2.0).unwrap();
        assert_eq!(s.dt, DEFAULT_DT);
        assert_eq!(s.record_stride, 20);
        assert_eq!(s.t_ringdown, 8.0);
        assert!(s.validate().is_ok());
        assert_eq!(fock_for(&p, 2.0), 19);
        assert_eq!(fock_for(&p, 3.0), 21);
    }

    #[test]
    fn ringdown_follows_the_slowest_cavity() {
        let mut p = ModelParams::symmetric(1.0, 1.0, 0.0);
        p.nodes[1].kappa = 0.3;
        let s = ProtocolSchedule::for_params(&p, 1.0).unwrap();
        assert!(s.t_ringdown >= 8.0 / 0.3);
        assert!(s.t_ringdown < 8.0 / 0.3 + s.record_every());
        assert!(s.validate().is_ok());
    }

    #[test]
    fn explicit_cutoff_wins() {
        let mut p = ModelParams::symmetric(1.0, 1.0, 0.0);
        p.n_fock = Some(7);
        assert_eq!(fock_for(&p, 3.0), 7);
    }

    #[test]
    fn rejects_off_grid_durations() {
        assert!(ProtocolSchedule::new(1.001, 0.0, 0.01, 1).validate().is_err());
        assert!(ProtocolSchedule::new(-1.0, 0.0, 0.01, 1).validate().is_err());
    }
}
