//! Experiment harness on top of `kinetic-core`: config files, sweeps over
//! function families, CSV/JSON reports and pass/fail verdicts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod family;
pub mod report;
pub mod sweep;

pub use config::{Experiment, ExperimentConfig, Regime, Resolution};
pub use error::{LabError, Result};
pub use experiments::{run_config, Lab};
pub use sweep::{SweepResult, Verdict};
