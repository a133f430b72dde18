//! Experiment driver for the duct PINN solver: configuration, sweeps,
//! the gradient study and the invariant suite.

pub mod checks;
pub mod config;
pub mod output;
pub mod run;
