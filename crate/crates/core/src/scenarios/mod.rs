//! Scenario generators: the two tightness constructions, seeded random
//! configs and traffic, scenario files, failure minimization and an
//! independent fixed-step simulator used as a cross-check.

mod io;
mod minimize;
mod oracle;
mod random;
mod tightness;

use thiserror::Error;

pub use io::{read_scenario_csv, write_scenario_csv, ScenarioFileError};
pub use minimize::minimize;
pub use oracle::{deviations, error_budget, exact_samples, fixed_step_oracle, max_deviation, OracleSamples};
pub use random::{arrival_resolution, derive_seed, gate_quantum, random_config, random_config_any, random_scenario};
pub use tightness::{class1_drain_lengths, tightness_class1, tightness_class2};

/// Seed of every random generator in this module.
pub type Seed = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario needs {needed} AVB classes, config has {available}")]
    InsufficientClasses { needed: usize, available: usize },
}
