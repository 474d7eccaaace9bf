//! Experiment runner for the `loopzeta` library: config resolution, artifact
//! emission and the acceptance suite.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod run;
