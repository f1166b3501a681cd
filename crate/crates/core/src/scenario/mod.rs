//! Scenario documents, design synthesis, the closed-loop runner and traces.

mod config;
mod design;
mod runner;
mod trace;

pub use config::{
    builtin_names, load_scenario, parse_scenario, AccommodationConfig, AccommodationSpec, Attack, AttackSpec,
    CouplingSpec, DesignSpec, DetectionConfig, DetectionSpec, ScenarioConfig, ScenarioFile, SubsystemSpec,
    ThresholdSetting, Thresholds, TopologySpec, BUILTIN_SCENARIOS, DEFAULT_HORIZON,
};
pub use design::{network_closed_loop, Designs, NodeDesign};
pub use runner::{calibrate, resolve_thresholds, run, run_with, simulate, RunOptions, ScenarioRun};
pub use trace::{StepRecord, Trace, CSV_COLUMNS};
