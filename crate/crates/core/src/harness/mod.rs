//! Experiment front end: configuration, seed sweeps, record files and
//! slope tables.

mod config;
mod run;

pub use config::{
    load_config, schedule_defaults, CompressorSection, GraphSection, ProblemSection, RunConfig, ScheduleSection,
    DESK_AGENTS, DESK_HORIZON, DESK_SEEDS, FULL_HORIZON,
};
pub use run::{
    csv_name, is_recorded, mean_and_se, mean_curve, read_csv, run_experiment, run_seed, summarize, write_csv,
    ExperimentReport, RunRecord, RunSummary, SeedOutcome, SeedSummary, SlopeRow, SlopeTable, CSV_HEADER,
};
