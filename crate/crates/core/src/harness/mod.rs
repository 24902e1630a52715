//! Scenario files, random instances, verification runs and reports.

pub mod config;
pub mod generate;
pub mod report;
pub mod run;

pub use config::{Mode, Profile, ScenarioConfig, Tolerances};
pub use generate::{gen_hamiltonian, gen_q_hermitian_observable, GenKind, GenOptions};
pub use report::{emit_report, CheckEntry, ReportFormat, RunReport};
pub use run::run_scenario;
