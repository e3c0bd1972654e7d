//! Command-line workflows for conditional rank-rank regression: CSV
//! ingestion, estimation with bootstrap inference, subgroup tables,
//! transition matrices, rank export, simulation and Monte Carlo runs.

pub mod config;
pub mod error;
pub mod ingest;
pub mod run;
pub mod simulate;

pub use config::{BootstrapOptions, RunConfig};
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, ColumnRoles};
pub use run::{export_ranks, run_estimate, run_from_ranks, RanksConfig, RunReport};
