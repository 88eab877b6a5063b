//! Experiment driver: configuration, seeded invariant suites, a brute-force
//! minimization oracle and deterministic report output.

pub mod checks;
pub mod config;
pub mod oracle;
pub mod report;
pub mod run;
