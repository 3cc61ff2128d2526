//! Scenario configuration, initial data, parameter sweeps and persistence.

pub mod config;
pub mod initial;
pub mod io;
pub mod sweep;

pub use config::{Preset, ScenarioConfig, SweepParam};
pub use initial::{make_initial_data, InitialData};
pub use sweep::{fit_powerlaw, run_scenario, run_sweep, PowerLawFit, ScenarioOutcome, SweepRecord};
