//! Coding a subset `A ⊆ B` given a binary classifier `g` on `B`.
//!
//! `B` is split into `B₁ = {x : g(x) = 1}` and `B₀`. The stream holds `|A₁|`
//! in `⌈log2(|A|+1)⌉` bits, then the pair (rank of `A₁` in `B₁`, rank of `A₀`
//! in `B₀`) as one mixed-radix number `r₁·C(|B₀|,|A₀|) + r₀` in
//! `⌈log2(C(|B₁|,|A₁|)·C(|B₀|,|A₀|))⌉` bits. The decoder already knows `|A|`,
//! so `|A₀|` is not written.
//!
//! One joint field is never wider than two separate ones, and its width is
//! monotone in the count of the pair, so moving `|A₁|` away from the
//! hypergeometric mode never makes the code longer.

use num_rational::Ratio;

use super::bits::{BitReader, BitStream};
use num_integer::Integer;

use super::subset::{binomial, check_sorted, subset_rank, subset_unrank, SubsetCode};
use super::CodecError;
use crate::numerics::{ceil_log2, ceil_log2_big};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierSplit {
    /// Members of `B` with `g = 1`, ascending.
    pub ones: Vec<u32>,
    /// Members of `B` with `g = 0`, ascending.
    pub zeros: Vec<u32>,
}

impl ClassifierSplit {
    pub fn new(b: &[u32], g: impl Fn(u32) -> bool) -> Result<Self, CodecError> {
        check_sorted(b, "universe")?;
        let (ones, zeros) = b.iter().partition(|&&x| g(x));
        Ok(ClassifierSplit { ones, zeros })
    }

    pub fn len(&self) -> usize {
        self.ones.len() + self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `κ_B = |B₁| / |B|`, or `None` for an empty universe.
    pub fn kappa(&self) -> Option<Ratio<u64>> {
        (!self.is_empty()).then(|| Ratio::new(self.ones.len() as u64, self.len() as u64))
    }
}

/// Width of the `|A₁|` header for a subset of size `a`.
pub fn header_width(a: usize) -> u32 {
    ceil_log2(a as u64 + 1)
}

/// Bit counts of one conditional encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConditionalWidths {
    pub header: u64,
    /// The joint rank field.
    pub payload: u64,
}

impl ConditionalWidths {
    pub fn total(&self) -> u64 {
        self.header + self.payload
    }
}

/// Encode `a ⊆ b` given `g`, appending to `out`.
pub fn encode_set_conditional(
    a: &[u32],
    b: &[u32],
    g: impl Fn(u32) -> bool,
    out: &mut BitStream,
) -> Result<ConditionalWidths, CodecError> {
    check_sorted(a, "subset")?;
    let split = ClassifierSplit::new(b, &g)?;
    let (a1, a0): (Vec<u32>, Vec<u32>) = a.iter().partition(|&&x| g(x));
    let c1 = subset_rank(&a1, &split.ones)?;
    let c0 = subset_rank(&a0, &split.zeros)?;
    let start = out.len();
    let header = header_width(a.len());
    out.write_u64(a1.len() as u64, header)?;
    let c0_count = c0.count();
    let payload = ceil_log2_big(&(c1.count() * &c0_count));
    out.write_big(&(c1.rank * c0_count + c0.rank), payload)?;
    let widths = ConditionalWidths {
        header: header as u64,
        payload,
    };
    debug_assert_eq!(out.len() - start, widths.total());
    Ok(widths)
}

/// Widths `encode_set_conditional` would produce, without building a stream.
pub fn conditional_widths(
    a: &[u32],
    b: &[u32],
    g: impl Fn(u32) -> bool,
) -> Result<ConditionalWidths, CodecError> {
    let mut scratch = BitStream::new();
    encode_set_conditional(a, b, g, &mut scratch)
}

/// Decode a subset of size `size` of `b`, given the same `g` as the encoder.
pub fn decode_set_conditional(
    r: &mut BitReader<'_>,
    b: &[u32],
    size: usize,
    g: impl Fn(u32) -> bool,
) -> Result<Vec<u32>, CodecError> {
    let split = ClassifierSplit::new(b, g)?;
    if size > split.len() {
        return Err(CodecError::InconsistentSizes(format!(
            "subset size {size} exceeds universe {}",
            split.len()
        )));
    }
    let n1 = r.read_u64(header_width(size))? as usize;
    if n1 > size || n1 > split.ones.len() || size - n1 > split.zeros.len() {
        return Err(CodecError::InconsistentSizes(format!(
            "header claims {n1} of {size} members among {} ones and {} zeros",
            split.ones.len(),
            split.zeros.len()
        )));
    }
    let count1 = binomial(split.ones.len() as u64, n1 as u64)?;
    let count0 = binomial(split.zeros.len() as u64, (size - n1) as u64)?;
    let total = &count1 * &count0;
    let joint = r.read_big(ceil_log2_big(&total))?;
    if joint >= total {
        return Err(CodecError::RankOutOfRange {
            what: "subset pair",
            at: r.position(),
        });
    }
    let (r1, r0) = joint.div_rem(&count0);
    let c1 = SubsetCode {
        rank: r1,
        universe: split.ones.len(),
        size: n1,
    };
    let c0 = SubsetCode {
        rank: r0,
        universe: split.zeros.len(),
        size: size - n1,
    };
    let mut out = subset_unrank(&c1, &split.ones)?;
    out.extend(subset_unrank(&c0, &split.zeros)?);
    out.sort_unstable();
    Ok(out)
}
