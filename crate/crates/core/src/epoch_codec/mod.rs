//! Re-encoding an epoch's shuffle with the model as side information.
//!
//! An epoch is written either as a split at some batch boundary, where the
//! classifier at that checkpoint separates the seen elements from the unseen
//! ones, or batch by batch going backwards, where each post-step classifier
//! narrows down which pool members formed the batch.

mod account;
mod code;
mod file;
mod select;

pub use account::{
    case1_bound, case2_bound, check_eps_beta_ceiling, epoch_accounting, AccountingRow,
    CeilingVerdict, ACCOUNTING_HEADER,
};
pub use code::{
    decode_epoch, decode_run_strict, encode_case1, encode_case2, encode_epoch, j_field_width,
    strict_candidate_bound, DecodedEpoch, EncodedEpoch, EpochCode, EpochContext, FieldWidths,
    SideInfo,
};
pub use file::{epoch_code_from_bytes, epoch_code_to_bytes, MAGIC};
pub use select::{select_case, split_window, Case, CaseSelector};

use crate::codec::CodecError;
use crate::engine::EngineError;
use crate::model::ModelError;

/// Which side information the decoder is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Only the model after the epoch; intermediate models come from
    /// reverse search.
    Strict,
    /// Every checkpoint of the epoch, taken from the trace.
    Accounting,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Accounting => "accounting",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = EpochCodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Mode::Strict),
            "accounting" => Ok(Mode::Accounting),
            _ => Err(EpochCodecError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpochCodecError {
    #[error("at bit {at}: {source}")]
    Codec {
        at: u64,
        #[source]
        source: CodecError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("epoch {0} did not complete")]
    Incomplete(usize),
    #[error("{0}")]
    Config(String),
    #[error("strict decoding refused: {0}")]
    Infeasible(String),
    #[error("decoded data is inconsistent: {0}")]
    Mismatch(String),
    #[error("malformed epoch code file: {0}")]
    Format(String),
}

impl From<CodecError> for EpochCodecError {
    fn from(source: CodecError) -> Self {
        EpochCodecError::Codec { at: 0, source }
    }
}
