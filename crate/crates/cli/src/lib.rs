//! Command-line front end and JSON service for `exsearch-core`.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod service;

pub use app::run;
pub use error::CliError;
