//! Experiment front end: configuration files, multi-seed runs, CSV logs,
//! learning-curve plots and summary comparisons.

mod calibration;
mod compare;
mod config;
mod csvlog;
mod experiment;
mod plot;

pub use calibration::{calibrated_threshold, reference_return, solved_threshold, CALIBRATION_EPISODES, CALIBRATION_SEED};
pub use compare::{compare_summary, Comparison, ModeSummary};
pub use config::{parse_config, render_config, ExperimentConfig};
pub use csvlog::{
    aggregate, aggregate_curves, curve, format_aggregate_csv, format_run_csv, interpolate, parse_aggregate_csv,
    parse_run_csv, read_run_csv, write_run_csv, AggregatePoint, Axis, RunLog, AGGREGATE_COLUMNS, COLUMNS,
};
pub use experiment::{aggregate_path, run_csv_path, run_experiment, run_log, run_metadata, trace_path, ExperimentReport, SeedOutcome};
pub use plot::{emit_plot, render_svg, LineStyle, PlotSeries};
