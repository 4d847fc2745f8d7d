//! Physical model: parameters and units, dot basis, the effective and
//! four-level Hamiltonians, collapse and detector operators.

pub mod basis;
pub mod hamiltonian;
pub mod lindblad;
pub mod params;

pub use basis::{
    bell_y_state, cavity_label, dot_label, dot_projector, dot_transition, fock_vector,
    level_state, sigma_y, sigma_z, single_node_layout, two_node_ground, two_node_layout, y_state,
    DotLevel, EFFECTIVE_DOT_DIM, FULL_DOT_DIM,
};
pub use hamiltonian::{
    branch_amplitude_analytic, branch_emission_analytic, build_effective_hamiltonian,
    build_full_hamiltonian,
};
pub use lindblad::{
    collapse_operators, detector_jump_ops, Channel, ChannelLabel, LindbladModel, ModelKind,
};
pub use params::{
    inas, lambda_from_physical, DotDecoherence, ModelParams, NodeParams, PhysicalLambda,
    UnitMode, HBAR_EV_S,
};
