//! Exact combinatorial codes over an MSB-first bit stream.

mod bits;
mod bound;
mod conditional;
mod perm;
mod subset;

pub use bits::{BitReader, BitStream};
pub use bound::theoretical_set_bound;
pub use conditional::{
    conditional_widths, decode_set_conditional, encode_set_conditional, header_width,
    ClassifierSplit, ConditionalWidths,
};
pub use perm::{perm_rank, perm_unrank, perm_width, PermCode};
pub use subset::{
    binomial, binomial_width, rank_positions, subset_rank, subset_unrank, unrank_positions,
    SubsetCode,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("value needs {bits} bits but the field is {width} bits wide")]
    ValueTooWide { bits: u64, width: u64 },
    #[error("bit stream ended at bit {at}")]
    EndOfStream { at: u64 },
    #[error("malformed trailer byte")]
    BadTrailer,
    #[error("{0}")]
    Domain(String),
    #[error("{what} rank out of range at bit {at}")]
    RankOutOfRange { what: &'static str, at: u64 },
    #[error("{0} ids are not strictly increasing")]
    NotSorted(&'static str),
    #[error("id {id} is not in the universe")]
    NotSubset { id: u32 },
    #[error("inconsistent sizes: {0}")]
    InconsistentSizes(String),
    #[error("not a permutation: {0}")]
    NotPermutation(String),
}
