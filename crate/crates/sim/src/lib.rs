//! File formats, plots and the command-line driver for `admittance-core`.

pub mod cli;
pub mod output;
pub mod plot;
pub mod scenario_file;
