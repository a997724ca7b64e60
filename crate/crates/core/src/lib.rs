//! Deterministic fixed-point SGD whose epoch shuffles are re-encoded with the
//! model as side information, with exact bit accounting.

pub mod codec;
pub mod engine;
pub mod epoch_codec;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod rng;

/// Exact fraction used for accuracies and progress statistics.
pub type Rational = num_rational::Ratio<i64>;
/// Default float type for entropy and bound arithmetic.
pub type Real = f64;
