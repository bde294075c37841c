//! Experiment runner: the comparison table, average-time sweeps over `N`,
//! one-shot selection and simulation, and self-verification.

pub mod config;
pub mod output;
pub mod sweep;
pub mod table;
pub mod verify;

pub use config::{ExperimentConfig, Preset};
pub use output::Format;
