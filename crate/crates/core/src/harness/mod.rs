//! Monte Carlo estimators with deterministic parallel aggregation, the
//! verification experiments, run configuration and report output.

mod config;
mod estimate;
mod experiments;
mod report;

pub use config::{run, Config, ExperimentKind, ExperimentSection, HSection, ModelSection, RngSection};
pub use estimate::{estimate, replicate, Accumulator, Estimate, Replicated, Sample, CHUNK};
pub use experiments::{
    doob_generator_value, experiment_dynkin_check, experiment_generator_forms,
    experiment_is_consistency, experiment_martingale_check, experiment_oracle_check,
    experiment_reverse_check, experiment_simulate, relative_deviation, ExperimentReport,
    IsOptions, Observable, RunConfig, Verdict, SIGMA_MULTIPLIER,
};
pub use report::{format_number, to_csv, to_json, OutputFormat};
