//! Scenario sweeps, the interference study and CLI plumbing.

pub mod config;
pub mod fixture;
pub mod output;
pub mod scenario;
pub mod summary;
pub mod sweep;
pub mod training;
