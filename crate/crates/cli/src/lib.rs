//! Scenario files, job dispatch and output formatting for the `treesir`
//! command-line tool.

pub mod output;
pub mod run;
pub mod scenario;
