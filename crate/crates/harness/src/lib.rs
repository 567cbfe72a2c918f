//! Experiment runner for `lti-ident`: seeded experiment cells, result tables
//! and the command-line interface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiment;
pub mod io;
pub mod sampling;
pub mod table;

pub use config::{DesignKind, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, ResultRow, RowStatus};
pub use sampling::sample_system;
pub use table::emit_table;
