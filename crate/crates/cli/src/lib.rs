//! Command-line front end: simulation, fitting and the experiment runner.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod table;
