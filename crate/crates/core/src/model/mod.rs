//! Datasets and small differentiable classifiers on the fixed-point grid.

mod dataset;
mod network;
pub mod sigmoid;
mod smooth;

pub use dataset::{generate_dataset, Dataset, Element, Family, GeneratorSpec};
pub use network::{AccuracyOracle, Model, ModelKind};
pub use smooth::{analytic_smoothness, estimate_smoothness, SmoothnessEstimate};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown dataset family {0:?}")]
    UnknownFamily(String),
    #[error("no element with id {0}")]
    UnknownId(u32),
    #[error("saturation: {0}")]
    Saturation(String),
    #[error("accuracy of an empty set is undefined")]
    EmptySubset,
    #[error("malformed dataset text: {0}")]
    Format(String),
}
