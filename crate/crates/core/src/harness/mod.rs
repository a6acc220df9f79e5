//! Scenario files, end-to-end runs, output emission and the scripted suite.

pub mod emit;
pub mod run;
pub mod scenario;
pub mod suite;
pub mod tune;

pub use run::{compare_variants, potential_variation, run_scenario, RunArtifacts, RunError, VariationMetrics};
pub use scenario::{emit_scenario, parse_scenario, Scenario, ScenarioError};
