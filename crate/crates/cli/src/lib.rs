//! Scenario runner for `rankflow`: JSON scenarios in, trajectory CSV and
//! invariance reports out.

pub mod build;
pub mod demos;
pub mod error;
pub mod output;
pub mod run;
pub mod scenario;
pub mod structure_input;

pub use error::{CliError, Result};
pub use run::{run, Outcome, Report};
pub use scenario::Scenario;
