//! Monte Carlo link runs and minimum-distance probes.

mod config;
mod experiment;
mod probe;

pub use config::{ExperimentConfig, ProbeConfig, ProbeMatrix};
pub use experiment::{
    estimate_dof_slope, feasibility_check, run_experiment, run_trials, write_trials_csv, PowerPoint, RunSummary,
    TrialRecord, CSV_HEADER,
};
pub use probe::{
    matrix_for_channel, probe_channel, probe_matrix, reference_slope, run_probe, write_probe_csv, ChannelProbe,
    ProbeSummary, PROBE_HEADER,
};
