//! Experiment harness behind the `rashomon-al` command: run configuration,
//! replicated runs, pairwise statistics and plot data.

pub mod config;
pub mod experiment;
pub mod plotdata;
pub mod stats;
