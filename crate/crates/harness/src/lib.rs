//! Experiment runner, result files and acceptance checks for the heterogeneous
//! network simulator.

pub mod acceptance;
pub mod experiment;
pub mod output;
pub mod stats;
