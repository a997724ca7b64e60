//! Epoch-based SGD on the grid, its statistics, and step reversal.

mod config;
mod io;
mod reverse;
mod trace;

pub use config::{format_rational, parse_rational, RunConfig, StepBound};
pub use io::{checkpoint_from_bytes, checkpoint_to_bytes};
pub use reverse::{
    injectivity_sweep, preimages, reverse_epoch, reverse_step, search_radius,
    InjectivityReport, MAX_CANDIDATES,
};
pub use trace::{
    measure_local_progress, run, run_epoch, traces_to_csv, EpochPermutation, EpochTrace,
    RunResult, StepStats,
};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("epoch {epoch}, step {j}: {source}")]
    Step {
        epoch: usize,
        j: usize,
        #[source]
        source: ModelError,
    },
    #[error("epoch {0} did not complete")]
    Incomplete(usize),
    #[error("no grid point steps to {image}")]
    NoPreimage { image: String },
    #[error("{image} has {} preimages: {}", preimages.len(), preimages.join(" "))]
    MultiplePreimages {
        image: String,
        preimages: Vec<String>,
    },
    #[error("reversing the step on batch {j}: {source}")]
    Reverse {
        j: usize,
        #[source]
        source: Box<EngineError>,
    },
    #[error("search refused: {0}")]
    Infeasible(String),
    #[error("malformed file: {0}")]
    Format(String),
}
