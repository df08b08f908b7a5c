//! Benchmark driver: loads a dataset, runs the search once per sample,
//! scores final elites against ground truth and aggregates repeated runs
//! over the samples that are closed in every run.

mod aggregate;
mod dataset;
mod output;
mod run;

pub use aggregate::{aggregate, AggregateReport, CurveRow, Curves, MetricSummaries, Subset, Summary, SUBSET_RULE};
pub use dataset::{
    fixture_targets, load_dataset, write_fixture_dataset, Dataset, FixtureTarget, Sample, GROUND_TRUTH_FILE,
    PROMPT_FILE,
};
pub use output::{
    curves_csv, per_sample_jsonl, write_outputs, CURVES_FILE, CURVE_HEADER, PER_SAMPLE_FILE, POPULATION_CURVES_FILE,
    REPORT_FILE,
};
pub use run::{
    evaluate_run, sample_seed, Backends, CurvePoint, Failure, FailureKind, RunConfig, RunReport, SampleResult,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no usable samples under {0}")]
    EmptyDataset(PathBuf),
    #[error("runs cover different samples")]
    MismatchedSampleSets,
    #[error("nothing to aggregate")]
    NoRuns,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot build fixture {0}")]
    Fixture(String),
    #[error("{0}")]
    Io(String),
}
