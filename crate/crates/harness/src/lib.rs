//! Experiment runner for the `icls` solver.
//!
//! Sweeps grids of inexactness levels and stopping tolerances on the
//! elliptic and Burgers benchmarks, collecting counter summaries, per-run
//! iteration traces and the runtime checks used by the acceptance suite.

pub mod checks;
pub mod experiment;
pub mod table;
pub mod trace;

pub use experiment::{
    run_experiment, ExperimentRow, ExperimentSpec, Instance, ProblemSpec, RowStatus, RunOptions,
    TolerancePair, DEFAULT_THETAS,
};
pub use table::{render_table, write_summary, Metric};
pub use trace::JsonlTrace;
