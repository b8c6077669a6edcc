//! Scenario configuration, orchestration and file emission behind the `axihee` binary.

pub mod check;
pub mod config;
pub mod scenario;
pub mod sweep;
