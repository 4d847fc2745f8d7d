//! Command-line plumbing: configuration, scenario presets, convergence gates,
//! the validation suite and CSV/JSON output.

pub mod config;
pub mod gates;
pub mod output;
pub mod scenarios;
pub mod validate;

pub use config::{
    parse_config, parse_config_for, Emit, GateConfig, RunConfig, Scenario, Sweep, TrionConfig, DEFAULT_SEED,
};
pub use gates::{check_integrity, effective_gates, relative_change, require_pass, trion_gates};
pub use output::{format_f64, Cell, Check, ScenarioOutput, Table, GIT_DESCRIBE};
pub use scenarios::{check_lines, herald_table, run_scenario, run_scenario_with, value_label, Log};
pub use validate::{closed_node_state, closed_system_overlaps, validate_suite};
