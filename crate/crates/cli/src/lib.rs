//! Library surface of the scenario runner: JSON scenario ingestion, report
//! assembly, the per-command builders, and the corpus invariant sweep.

pub mod checks;
pub mod commands;
pub mod report;
pub mod scenario;

pub use commands::{execute, Cli, Command, OutputFormat};
pub use report::{CheckLine, Report, Table};
pub use scenario::{load_scenario, scenario_hash, LoadedScenario, Scenario};
