//! Scenario parsing, Monte Carlo sweeps and output files.

pub mod config;
pub mod output;
pub mod plot;
pub mod sweep;

pub use config::{Mode, ScenarioConfig};
pub use output::{emit_outputs, emit_overlay, read_rows, read_summary, SweepFiles};
pub use sweep::{
    run_convergence, run_distance_sweep, run_element_sweep, run_single, run_stochastic_phase_baseline, run_trial,
    ConvergenceResult, SummaryRow, SweepResult, TrialRow,
};
