//! Experiment orchestration: configuration, runs with per-epoch encoding,
//! reports and plot data, and the statistical and inequality suites.

mod experiment;
mod hoeffding;
mod inequalities;
mod spec;

pub use experiment::{
    decode_artifacts, emit_plots_data, orders_csv, replication_dir, report_totals, run_experiment,
    run_replication,
    CompressionReport, ExperimentOutcome, Replication, ReportTotals, Summary, PLOTS_HEADER,
    SUMMARY_HEADER,
};
pub use hoeffding::{
    default_checks, verify_hoeffding, HoeffdingCheck, HoeffdingResult, HOEFFDING_HEADER,
    MIN_TRIALS,
};
pub use inequalities::{
    binomial_entropy_sweep, entropy_upper_sweep, pinsker_sweep, run_inequality_suite,
    set_code_sweep, split_entropy_point, split_entropy_sweep, stirling_sweep, PointOutcome,
    SuiteRow, FLOAT_TOLERANCE, SUITE_HEADER,
};
pub use spec::{ExperimentSpec, Suites, KEYS};

use std::path::PathBuf;

use crate::engine::EngineError;
use crate::epoch_codec::EpochCodecError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("replication {replication}, epoch {epoch}: {source}")]
    Epoch {
        replication: usize,
        epoch: usize,
        #[source]
        source: EpochCodecError,
    },
    #[error(transparent)]
    Codec(#[from] EpochCodecError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("decoded order differs from the run: {0}")]
    Decode(String),
    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
}
