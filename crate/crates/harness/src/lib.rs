//! Configuration, parallel execution, file formats and the `isoflow`
//! command line for the flow simulator in `isoflow-core`.

pub mod claims;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod output;
pub mod runner;
