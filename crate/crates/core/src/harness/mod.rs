//! Experiment harness: a sweep over algorithms, initial-set sizes and
//! budgets on Independent Cascade tasks, written out as CSV.
//!
//! Every cell of a repetition sees the same training tasks, test tasks and
//! test realizations, so differences between algorithms are paired.

mod config;
mod output;
mod run;

pub use config::{Algorithm, Cell, EstimatorBudget, ExperimentConfig, GraphSpec, LValue, SyntheticGraph};
pub use output::{CellSummary, ExperimentTable, PlotData, Row, Series, SCHEMA_LINE};
pub use run::{load_graph, run_experiment, run_on_graph};
