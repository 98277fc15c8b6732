//! Verification harness around `weil-core`: run configuration, the suites,
//! the report format and the small parsers the command line uses.

pub mod config;
pub mod format;
pub mod parse;
pub mod probes;
pub mod report;
pub mod suites;
