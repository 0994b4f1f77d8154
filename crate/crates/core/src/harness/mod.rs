//! Scenario execution, parameter sweeps and the invariant suite.

pub mod scenario;
pub mod sweep;
pub mod validate;

pub use scenario::{
    evaluate, run_scenario, run_scenario_with, Algorithm, Prepared, ResultRow, RunOptions,
};
pub use sweep::{sweep, sweep_with, ExperimentSpec, SweepAxis, SweepRow, SweepValue};

use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::Result;

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path)
}
pub use validate::{validate, Fault, Report, ValidateOptions};
