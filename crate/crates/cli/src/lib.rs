//! Command-line front end: configuration, data presets, orchestration and
//! artifact export.

pub mod config;
pub mod export;
pub mod presets;
pub mod run;
