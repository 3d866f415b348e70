//! Scenario configuration, the closed-loop simulation, batch sweeps, trace
//! files, and plot emission.

mod config;
mod plots;
mod scenario;
mod sweep;
mod trace;

pub use config::{
    AttackConfig, ControlConfig, InitialState, MapSpec, NoiseConfig, Rates, ScenarioConfig,
};
pub use plots::{emit_plots, PlotInputs};
pub use scenario::{
    run_scenario, run_scenario_with_monitor, RunResult, SaviorMonitor, SaviorRunStats,
};
pub use sweep::{
    calibrate_savior, metrics_csv, roc_csv, run_savior_baseline, run_sweep,
    savior_reference_config, sweep_summary_csv, write_text, GridCell, RunSummary, SaviorComparison,
    SweepResult, TAKEOVER_DEV,
};
pub use trace::{parse_trace, read_trace, write_trace, CtrlSource, TraceRow, TRACE_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
    #[error(transparent)]
    Filter(#[from] crate::msf::FilterError),
    #[error(transparent)]
    Fit(#[from] crate::vehicle::FitError),
    #[error(transparent)]
    Roc(#[from] crate::roc::RocError),
    #[error("trace parse error at row {row}: {msg}")]
    TraceParse { row: usize, msg: String },
    #[error("nothing to plot: {0}")]
    EmptyPlotInputs(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
