//! Library surface of the `optsel` binary: config parsing, suite
//! orchestration, plotting, and oracle reports.

pub mod config;
pub mod oracle_report;
pub mod plot;
pub mod suite;
