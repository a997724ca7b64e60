//! Fixed-point grid, exact dyadic rationals, and the information-theoretic
//! functions used by the bit accounting.

mod dyadic;
mod factorial;
mod fixed;
mod info;

pub use dyadic::Dyadic;
pub use factorial::{
    ceil_log2, ceil_log2_big, factorial, log2_big, log2_factorial, log2_factorial_table,
    stirling_log2_factorial,
};
pub use fixed::{round_div, round_shift, FixedScalar, FixedVector, Grid, Saturation, MAX_SCALE};
pub use info::{
    binary_entropy, kl_bernoulli, pinsker_slack, verify_entropy_upper, verify_split_entropy,
    ProbGrid,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },
    #[error("KL divergence D({p} ‖ {q}) is infinite")]
    InfiniteDivergence { p: f64, q: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("probability grid is empty")]
    EmptyGrid,
    #[error("invalid grid configuration: {0}")]
    Config(String),
}
