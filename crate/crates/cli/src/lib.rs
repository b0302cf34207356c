//! Command-line front end of the `locprec` simulator: configuration files,
//! campaign execution, CSV/JSON Lines export and plot data.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config_io;
pub mod error;
pub mod export;
pub mod filter;
pub mod plot;

pub use app::{execute, RunReport, RunRequest};
pub use config_io::{echo_config, parse_config, parse_config_str};
pub use error::{CliError, Result};
pub use export::{export_results, import_results, OutputFormat, ResultRow, CSV_COLUMNS, SCHEMA_VERSION};
pub use filter::CellFilter;
pub use plot::{emit_plot_data, PlotKind};
