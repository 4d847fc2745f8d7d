//! Time evolution: Lindblad master-equation integration and quantum-jump
//! trajectories with reproducible seeding.

pub mod ensemble;
pub mod master;
pub mod mcwf;
pub mod options;
pub mod series;

pub use ensemble::{
    ensemble_average, ensemble_density, mean_stderr, run_indexed, trajectory_seed, EnsembleRun,
};
pub use master::{
    propagate_master, propagate_master_phases, MasterRun, Observables, HERMITICITY_TOLERANCE,
    POSITIVITY_TOLERANCE,
};
pub use mcwf::{mcwf_phases, mcwf_trajectory, Click, TrajectoryRecord, TrajectoryRun};
pub use options::{check_step_rule, max_dt, steps_for, IntegrationOptions, Phase, StepRule};
pub use series::TimeSeries;
