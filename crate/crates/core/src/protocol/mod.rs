//! The two-node heralding experiment and its oracles.

pub mod analytic;
pub mod herald;
pub mod photons;
pub mod schedule;
pub mod trion;

pub use analytic::{
    analytic_joint_state, conditional_joint_state, dot_coherence_analytic, scheduled_amplitude,
};
pub use herald::{
    fidelity_curve, herald_statistics, herald_target, outcome_from, run_herald_protocol,
    FidelityStats, HeraldExperiment, HeraldOutcome, HeraldPort, HeraldRow, HeraldStatistics,
};
pub use photons::{
    detection_rate, mean_detected_photons, mean_field, unconditional_states, unravelling_distance,
    RATE_TOLERANCE,
};
pub use schedule::{
    fock_for, ProtocolSchedule, DEFAULT_DT, DEFAULT_RECORD_EVERY, FULL_MODEL_DT, FULL_MODEL_FOCK,
    RINGDOWN_LIFETIMES,
};
pub use trion::{
    dressed_ground, fit_trion_loss, trion_admixture_bound, trion_population,
    trion_rate_estimates, TrionFit, TrionStart,
};
