//! Config-file front end for the simulator: parses flat experiment files,
//! runs them and writes CSV/JSON report bundles.

pub mod config;
pub mod report;

pub use config::{ConfigError, Settings};
pub use report::{run_and_report, write_bundle, ReportBundle, ReportError};
