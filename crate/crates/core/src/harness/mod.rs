//! Experiments, configuration and the command-line interface.

pub mod cli;
pub mod config;
pub mod experiments;

pub use cli::cli_main;
pub use config::{load_config, parse_config, ChannelKind, ExperimentConfig, PopulationConfig};
pub use experiments::{
    energy_sweep, lmax_sweep, outage, participation, run_energy_sweep, run_lmax_sweep, run_outage,
    run_participation, trial_population, write_rows, write_trials, ExperimentRow, Sweep, TrialRecord,
};
