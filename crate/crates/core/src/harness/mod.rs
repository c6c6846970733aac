//! Seeded trials of the four methods, datasets D1 (transitions) and D2
//! (policy costs), and the CSV outputs behind learning curves and tables.

mod config;
mod output;
mod run;

pub use config::{DirectSettings, ExperimentConfig, GpSettings, Method, MonteCarloSettings};
pub use output::{
    aggregate, aggregate_dir, collect_records, invalid_trials, label_slug, mean_std, read_failures, read_records,
    split_label, write_curves, write_failures, write_outputs, write_records, write_summary, Aggregate, CurvePoint,
    InvalidTrials, SummaryRow, RECORDS_HEADER,
};
pub use run::{
    init_trial, learned_prior, mb_propose, run_bo, run_experiment, run_mb, run_mb_then_mf, run_mbmf, run_mf, run_trial,
    trial_seed, ExperimentResult, IterationRecord, PriorMode, TrialData, TrialFailure, TrialOutcome, TrialStats,
};
