//! Library surface of the experiment runner (config schema, report
//! writers, pipeline dispatch); the `spvar` binary is a thin wrapper.

pub mod config;
pub mod report;
pub mod runner;
