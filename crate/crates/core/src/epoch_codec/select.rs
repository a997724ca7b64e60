//! Choosing between the split and the backward encoding.

use num_traits::Signed;

use super::EpochCodecError;
use crate::engine::EpochTrace;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// Split after batch `j − 1`, using the classifier at checkpoint `j`.
    Split { j: usize },
    /// Batches last to first.
    Backward,
}

impl Case {
    pub fn tag(&self) -> &'static str {
        match self {
            Case::Split { .. } => "split",
            Case::Backward => "backward",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseSelector {
    /// `⌈βn/8b⌉ + 1`, before clamping.
    pub j_s: usize,
    /// `⌊(1 − β/8)·n/b⌋ + 1`, before clamping.
    pub j_f: usize,
    pub case: Case,
    /// `|λ′ − λ″|` at the chosen split.
    pub gap: Option<Rational>,
    /// The clamped window `[max(j_s, 2), min(j_f, n/b)]` was empty.
    pub degenerate: bool,
}

fn floor_div(num: i128, den: i128) -> i128 {
    num.div_euclid(den)
}

/// `(j_s, j_f)` for `n`, `b` and `β ∈ [0, 1]`, computed exactly.
pub fn split_window(n: usize, b: usize, beta: Rational) -> (usize, usize) {
    let (bn, bd) = (*beta.numer() as i128, *beta.denom() as i128);
    let (n, b) = (n as i128, b as i128);
    // ⌈βn/8b⌉ = −⌊−βn/8b⌋
    let js = -floor_div(-bn * n, bd * 8 * b) + 1;
    // ⌊(1 − β/8)·n/b⌋ = ⌊(8·bd − bn)·n / (8·bd·b)⌋
    let jf = floor_div((8 * bd - bn) * n, 8 * bd * b) + 1;
    (js.max(0) as usize, jf.max(0) as usize)
}

/// Scan the window for the first `j` with `|λ′_j − λ″_j| ≥ β/4`.
pub fn select_case(trace: &EpochTrace, beta: Rational) -> Result<CaseSelector, EpochCodecError> {
    if !trace.is_complete() {
        return Err(EpochCodecError::Incomplete(trace.epoch));
    }
    let m = trace.steps();
    let (j_s, j_f) = split_window(trace.n, trace.b, beta);
    let lo = j_s.max(2);
    let hi = j_f.min(m);
    let threshold = beta / 4;
    let mut selector = CaseSelector {
        j_s,
        j_f,
        case: Case::Backward,
        gap: None,
        degenerate: lo > hi,
    };
    for j in lo..=hi {
        let s = trace.stat(j);
        let (Some(l1), Some(l2)) = (s.lambda_prime, s.lambda_doubleprime) else {
            continue;
        };
        let gap = (l1 - l2).abs();
        if gap >= threshold {
            selector.case = Case::Split { j };
            selector.gap = Some(gap);
            break;
        }
    }
    Ok(selector)
}
