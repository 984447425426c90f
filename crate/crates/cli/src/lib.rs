//! Command-line front end for the plan-ahead optimization testbed.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
