//! Epoch encoder and decoder.
//!
//! Stream layout: a 1-bit case tag (1 = split, 0 = backward).
//!
//! A split at `j` continues with `j − 1` in `⌈log2(n/b)⌉` bits, in strict mode
//! the checkpoint `W_j` at `coordinate_bits` per weight, the conditional code
//! of the seen set `X_{j−1}` within `X` given `acc(W_j, •)`, and the Lehmer
//! ranks of the seen and unseen orders.
//!
//! The backward case continues with, for `j = n/b` down to 1, the conditional
//! code of `B_j` within `X_j` given `acc(W_{j+1}, •)` and the rank of the
//! order inside `B_j`.
//!
//! In strict mode every reverse step whose image has `k > 1` preimages on the
//! grid is followed by the index of the true predecessor among them, in
//! `⌈log2 k⌉` bits. Backward codes put it right after the batch it reverses;
//! split codes append them for `j = n/b` down to 1 after the two orders. A
//! step with a unique preimage costs nothing.

use super::select::{select_case, Case, CaseSelector};
use super::{EpochCodecError, Mode};
use crate::codec::{
    decode_set_conditional, encode_set_conditional, perm_rank, perm_unrank, perm_width, BitReader,
    BitStream, PermCode,
};
use crate::engine::{preimages, search_radius, EngineError, EpochTrace, MAX_CANDIDATES};
use crate::model::{Dataset, Model};
use crate::numerics::{ceil_log2, FixedScalar, FixedVector};
use crate::Rational;

/// What both sides share besides the stream: the data, the architecture and
/// the step size.
#[derive(Clone, Copy, Debug)]
pub struct EpochContext<'a> {
    pub data: &'a Dataset,
    /// Any model of the right architecture; its weights are ignored.
    pub model: &'a Model,
    pub alpha: FixedScalar,
}

impl EpochContext<'_> {
    fn at(&self, w: &FixedVector) -> Result<Model, EpochCodecError> {
        Ok(self.model.with_weights(w.clone())?)
    }

    fn classifier(&self, w: &FixedVector) -> Result<Vec<bool>, EpochCodecError> {
        Ok(self.at(w)?.correctness(self.data)?)
    }
}

/// Side information handed to the decoder.
#[derive(Clone, Copy, Debug)]
pub enum SideInfo<'a> {
    /// `W_{i+1,1}` only.
    Strict { final_model: &'a FixedVector },
    /// `W_{i,1}, …, W_{i,n/b+1}`.
    Accounting { checkpoints: &'a [FixedVector] },
}

impl SideInfo<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            SideInfo::Strict { .. } => Mode::Strict,
            SideInfo::Accounting { .. } => Mode::Accounting,
        }
    }
}

/// An epoch's shuffle as a bit stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochCode {
    pub epoch: usize,
    pub n: usize,
    pub b: usize,
    pub stream: BitStream,
}

impl EpochCode {
    pub fn measured_bits(&self) -> u64 {
        self.stream.len()
    }
}

/// Bits spent per field kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FieldWidths {
    pub tag: u64,
    /// The split position.
    pub j_field: u64,
    /// Checkpoint written into the stream (strict splits only).
    pub model: u64,
    /// `|A₁|` headers of the conditional set codes.
    pub set_header: u64,
    /// Subset ranks.
    pub set_payload: u64,
    /// Permutation ranks.
    pub perm: u64,
    /// Preimage indices for ambiguous reverse steps (strict only).
    pub hint: u64,
}

impl FieldWidths {
    pub fn total(&self) -> u64 {
        self.tag + self.j_field + self.model + self.set_header + self.set_payload + self.perm + self.hint
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedEpoch {
    pub code: EpochCode,
    pub selector: CaseSelector,
    pub mode: Mode,
    pub widths: FieldWidths,
}

/// Width of the split-position field, `⌈log2(n/b)⌉`.
pub fn j_field_width(n: usize, b: usize) -> u32 {
    ceil_log2((n / b).max(1) as u64)
}

fn write_weights(w: &FixedVector, ctx: &EpochContext<'_>, out: &mut BitStream) -> Result<u64, EpochCodecError> {
    let grid = ctx.model.grid();
    let bits = grid.coordinate_bits();
    for r in w.raw() {
        out.write_u64((r + grid.max_raw()) as u64, bits)?;
    }
    Ok(bits as u64 * w.len() as u64)
}

fn read_weights(r: &mut BitReader<'_>, ctx: &EpochContext<'_>) -> Result<FixedVector, EpochCodecError> {
    let grid = ctx.model.grid();
    let bits = grid.coordinate_bits();
    let mut raw = Vec::with_capacity(ctx.model.d());
    for _ in 0..ctx.model.d() {
        let at = r.position();
        let v = r.read_u64(bits).map_err(|source| EpochCodecError::Codec { at, source })?;
        if v > 2 * grid.max_raw() as u64 {
            return Err(EpochCodecError::Mismatch(format!(
                "embedded weight at bit {at} lies off the grid"
            )));
        }
        raw.push(v as i64 - grid.max_raw());
    }
    Ok(FixedVector::from_raw(raw))
}

/// Largest candidate count any reverse step of this epoch would examine.
pub fn strict_candidate_bound(trace: &EpochTrace, ctx: &EpochContext<'_>) -> Result<u64, EpochCodecError> {
    let d = ctx.model.d() as u32;
    let mut worst = 0u64;
    for j in 1..=trace.steps() {
        let batch = ctx.data.select(trace.batch(j))?;
        let rho = search_radius(ctx.model, &batch, ctx.alpha);
        let count = (2 * rho as u64 + 1).checked_pow(d).unwrap_or(u64::MAX);
        worst = worst.max(count);
    }
    Ok(worst)
}

fn check_strict(trace: &EpochTrace, ctx: &EpochContext<'_>) -> Result<(), EpochCodecError> {
    let worst = strict_candidate_bound(trace, ctx)?;
    if worst > MAX_CANDIDATES {
        return Err(EpochCodecError::Infeasible(format!(
            "reverse steps would examine up to {worst} points (limit {MAX_CANDIDATES}) at d = {}",
            ctx.model.d()
        )));
    }
    Ok(())
}

fn check_trace(trace: &EpochTrace, ctx: &EpochContext<'_>) -> Result<(), EpochCodecError> {
    if !trace.is_complete() {
        return Err(EpochCodecError::Incomplete(trace.epoch));
    }
    if trace.n != ctx.data.len() {
        return Err(EpochCodecError::Config(format!(
            "trace covers {} elements but the dataset has {}",
            trace.n,
            ctx.data.len()
        )));
    }
    Ok(())
}

fn step_preimages(
    ctx: &EpochContext<'_>,
    w_next: &FixedVector,
    batch: &[u32],
    j: usize,
) -> Result<Vec<FixedVector>, EpochCodecError> {
    let batch = ctx.data.select(&sorted(batch))?;
    preimages(ctx.model, w_next, &batch, ctx.alpha).map_err(|e| {
        EpochCodecError::Engine(EngineError::Reverse {
            j,
            source: Box::new(e),
        })
    })
}

/// Write which preimage of `W_{j+1}` is `W_j`, if there is a choice.
fn write_hint(
    trace: &EpochTrace,
    ctx: &EpochContext<'_>,
    j: usize,
    out: &mut BitStream,
) -> Result<u64, EpochCodecError> {
    let found = step_preimages(ctx, trace.checkpoint(j + 1), trace.batch(j), j)?;
    let Some(idx) = found.iter().position(|w| w == trace.checkpoint(j)) else {
        return Err(EpochCodecError::Infeasible(format!(
            "reverse search from checkpoint {} misses its predecessor",
            j + 1
        )));
    };
    if found.len() == 1 {
        return Ok(0);
    }
    let width = ceil_log2(found.len() as u64);
    out.write_u64(idx as u64, width)?;
    Ok(width as u64)
}

/// Undo the step on batch `j`, reading an index when there is a choice.
fn read_hint(
    r: &mut BitReader<'_>,
    ctx: &EpochContext<'_>,
    w_next: &FixedVector,
    batch: &[u32],
    j: usize,
    hint_bits: &mut u64,
) -> Result<FixedVector, EpochCodecError> {
    let mut found = step_preimages(ctx, w_next, batch, j)?;
    match found.len() {
        0 => Err(EpochCodecError::Engine(EngineError::Reverse {
            j,
            source: Box::new(EngineError::NoPreimage {
                image: w_next.to_string(),
            }),
        })),
        1 => Ok(found.pop().expect("one")),
        k => {
            let width = ceil_log2(k as u64);
            let idx = at(r.position(), r.read_u64(width))? as usize;
            *hint_bits += width as u64;
            if idx >= k {
                return Err(EpochCodecError::Mismatch(format!(
                    "preimage index {idx} of {k} on batch {j}"
                )));
            }
            Ok(found.swap_remove(idx))
        }
    }
}

fn all_ids(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

fn sorted(ids: &[u32]) -> Vec<u32> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

/// Split encoding at `j` (`2 ≤ j ≤ n/b`).
pub fn encode_case1(
    trace: &EpochTrace,
    ctx: &EpochContext<'_>,
    j: usize,
    mode: Mode,
) -> Result<(EpochCode, FieldWidths), EpochCodecError> {
    check_trace(trace, ctx)?;
    let m = trace.steps();
    if j < 2 || j > m {
        return Err(EpochCodecError::Config(format!("split position {j} outside [2, {m}]")));
    }
    let mut out = BitStream::new();
    let mut w = FieldWidths {
        tag: 1,
        j_field: j_field_width(trace.n, trace.b) as u64,
        ..FieldWidths::default()
    };
    out.push_bit(true);
    out.write_u64((j - 1) as u64, w.j_field as u32)?;
    if mode == Mode::Strict {
        check_strict(trace, ctx)?;
        w.model = write_weights(trace.checkpoint(j), ctx, &mut out)?;
    }
    let cut = (j - 1) * trace.b;
    let order = &trace.permutation.order;
    let g = trace.correct_at(j);
    let set = encode_set_conditional(&sorted(&order[..cut]), &all_ids(trace.n), |x| g[x as usize], &mut out)?;
    w.set_header = set.header;
    w.set_payload = set.payload;
    w.perm += perm_rank(&order[..cut])?.write(&mut out)?;
    w.perm += perm_rank(&order[cut..])?.write(&mut out)?;
    if mode == Mode::Strict {
        for k in (1..=m).rev() {
            w.hint += write_hint(trace, ctx, k, &mut out)?;
        }
    }
    debug_assert_eq!(w.total(), out.len());
    Ok((
        EpochCode {
            epoch: trace.epoch,
            n: trace.n,
            b: trace.b,
            stream: out,
        },
        w,
    ))
}

/// Backward batch-by-batch encoding.
pub fn encode_case2(
    trace: &EpochTrace,
    ctx: &EpochContext<'_>,
    mode: Mode,
) -> Result<(EpochCode, FieldWidths), EpochCodecError> {
    check_trace(trace, ctx)?;
    if mode == Mode::Strict {
        check_strict(trace, ctx)?;
    }
    let mut out = BitStream::new();
    let mut w = FieldWidths {
        tag: 1,
        ..FieldWidths::default()
    };
    out.push_bit(false);
    for j in (1..=trace.steps()).rev() {
        let pool = trace.prefix_set(j);
        let batch = trace.batch(j);
        let g = trace.correct_at(j + 1);
        let set = encode_set_conditional(&sorted(batch), &pool, |x| g[x as usize], &mut out)?;
        w.set_header += set.header;
        w.set_payload += set.payload;
        w.perm += perm_rank(batch)?.write(&mut out)?;
        if mode == Mode::Strict {
            w.hint += write_hint(trace, ctx, j, &mut out)?;
        }
    }
    debug_assert_eq!(w.total(), out.len());
    Ok((
        EpochCode {
            epoch: trace.epoch,
            n: trace.n,
            b: trace.b,
            stream: out,
        },
        w,
    ))
}

/// Select the case with `β` and encode.
pub fn encode_epoch(
    trace: &EpochTrace,
    ctx: &EpochContext<'_>,
    beta: Rational,
    mode: Mode,
) -> Result<EncodedEpoch, EpochCodecError> {
    let selector = select_case(trace, beta)?;
    let (code, widths) = match selector.case {
        Case::Split { j } => encode_case1(trace, ctx, j, mode)?,
        Case::Backward => encode_case2(trace, ctx, mode)?,
    };
    Ok(EncodedEpoch {
        code,
        selector,
        mode,
        widths,
    })
}

/// What the decoder recovered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedEpoch {
    pub order: Vec<u32>,
    pub case: Case,
    pub widths: FieldWidths,
    /// `W_{i,1}`, reconstructed by reverse search in strict mode.
    pub start: Option<FixedVector>,
}

/// Attach the reader position to codec errors.
fn at<T>(pos: u64, res: Result<T, crate::codec::CodecError>) -> Result<T, EpochCodecError> {
    res.map_err(|source| EpochCodecError::Codec { at: pos, source })
}

fn read_perm(r: &mut BitReader<'_>, ids: &[u32]) -> Result<Vec<u32>, EpochCodecError> {
    let code = at(r.position(), PermCode::read(r, ids.len()))?;
    at(r.position(), perm_unrank(&code, ids))
}

/// Reverse the whole epoch from `W_{i,n/b+1}` once every batch is known,
/// returning `W_{i,1}, …, W_{i,n/b+1}`.
fn reverse_from_final(
    r: &mut BitReader<'_>,
    ctx: &EpochContext<'_>,
    final_model: &FixedVector,
    order: &[u32],
    b: usize,
    hint_bits: &mut u64,
) -> Result<Vec<FixedVector>, EpochCodecError> {
    let batches: Vec<&[u32]> = order.chunks(b).collect();
    let mut back = vec![final_model.clone()];
    for (idx, batch) in batches.iter().enumerate().rev() {
        let prev = read_hint(r, ctx, back.last().expect("nonempty"), batch, idx + 1, hint_bits)?;
        back.push(prev);
    }
    back.reverse();
    Ok(back)
}

/// Rebuild the order of `code` from the dataset and the side information.
pub fn decode_epoch(
    code: &EpochCode,
    ctx: &EpochContext<'_>,
    side: SideInfo<'_>,
) -> Result<DecodedEpoch, EpochCodecError> {
    let (n, b) = (code.n, code.b);
    if n != ctx.data.len() || b < 2 || n % b != 0 {
        return Err(EpochCodecError::Config(format!(
            "code for n = {n}, b = {b} does not fit a dataset of {} elements",
            ctx.data.len()
        )));
    }
    let m = n / b;
    if let SideInfo::Accounting { checkpoints } = side {
        if checkpoints.len() != m + 1 {
            return Err(EpochCodecError::Config(format!(
                "expected {} checkpoints, got {}",
                m + 1,
                checkpoints.len()
            )));
        }
    }
    let mut r = code.stream.reader();
    let mut w = FieldWidths {
        tag: 1,
        ..FieldWidths::default()
    };
    let split = at(r.position(), r.read_bit())?;
    let (order, case, start) = if split {
        w.j_field = j_field_width(n, b) as u64;
        let j = at(r.position(), r.read_u64(w.j_field as u32))? as usize + 1;
        if j < 2 || j > m {
            return Err(EpochCodecError::Mismatch(format!("split position {j} outside [2, {m}]")));
        }
        let wj = match side {
            SideInfo::Strict { .. } => {
                let before = r.position();
                let wj = read_weights(&mut r, ctx)?;
                w.model = r.position() - before;
                wj
            }
            SideInfo::Accounting { checkpoints } => checkpoints[j - 1].clone(),
        };
        let g = ctx.classifier(&wj)?;
        let cut = (j - 1) * b;
        let before = r.position();
        let left_set = at(r.position(), decode_set_conditional(&mut r, &all_ids(n), cut, |x| g[x as usize]))?;
        let set_bits = r.position() - before;
        w.set_header = crate::codec::header_width(cut) as u64;
        w.set_payload = set_bits - w.set_header;
        let right_set: Vec<u32> = {
            let mut in_left = vec![false; n];
            for &x in &left_set {
                in_left[x as usize] = true;
            }
            (0..n as u32).filter(|&x| !in_left[x as usize]).collect()
        };
        let before = r.position();
        let mut order = read_perm(&mut r, &left_set)?;
        order.extend(read_perm(&mut r, &right_set)?);
        w.perm = r.position() - before;
        let start = match side {
            SideInfo::Strict { final_model } => {
                let models = reverse_from_final(&mut r, ctx, final_model, &order, b, &mut w.hint)?;
                if models[j - 1] != wj {
                    return Err(EpochCodecError::Mismatch(format!(
                        "reverse search reached {} at checkpoint {j}, the stream says {}",
                        models[j - 1], wj
                    )));
                }
                Some(models[0].clone())
            }
            SideInfo::Accounting { .. } => None,
        };
        (order, Case::Split { j }, start)
    } else {
        let mut pool = all_ids(n);
        let mut current = match side {
            SideInfo::Strict { final_model } => final_model.clone(),
            SideInfo::Accounting { checkpoints } => checkpoints[m].clone(),
        };
        let mut batches: Vec<Vec<u32>> = Vec::with_capacity(m);
        for j in (1..=m).rev() {
            let g = ctx.classifier(&current)?;
            let before = r.position();
            let set = at(r.position(), decode_set_conditional(&mut r, &pool, b, |x| g[x as usize]))?;
            w.set_header += crate::codec::header_width(b) as u64;
            w.set_payload += r.position() - before - crate::codec::header_width(b) as u64;
            let before = r.position();
            batches.push(read_perm(&mut r, &set)?);
            w.perm += r.position() - before;
            pool.retain(|x| set.binary_search(x).is_err());
            current = match side {
                SideInfo::Strict { .. } => read_hint(&mut r, ctx, &current, &set, j, &mut w.hint)?,
                SideInfo::Accounting { checkpoints } => checkpoints[j - 1].clone(),
            };
        }
        batches.reverse();
        let start = matches!(side, SideInfo::Strict { .. }).then_some(current);
        (batches.concat(), Case::Backward, start)
    };
    if r.remaining() != 0 {
        return Err(EpochCodecError::Mismatch(format!(
            "{} unread bits after the last field",
            r.remaining()
        )));
    }
    debug_assert_eq!(w.total(), code.stream.len());
    Ok(DecodedEpoch {
        order,
        case,
        widths: w,
        start,
    })
}

/// Decode a run's epochs from last to first, given only the dataset and the
/// model after the last epoch. Returns the orders in forward epoch order and
/// the reconstructed initial model.
pub fn decode_run_strict(
    codes: &[EpochCode],
    ctx: &EpochContext<'_>,
    final_model: &FixedVector,
) -> Result<(Vec<Vec<u32>>, FixedVector), EpochCodecError> {
    let mut w = final_model.clone();
    let mut orders = Vec::with_capacity(codes.len());
    for code in codes.iter().rev() {
        let dec = decode_epoch(code, ctx, SideInfo::Strict { final_model: &w })?;
        w = dec.start.expect("strict decoding yields the starting model");
        orders.push(dec.order);
    }
    orders.reverse();
    Ok((orders, w))
}

/// `⌈log2 n!⌉`, the raw cost of an epoch order.
pub(crate) fn baseline_bits(n: usize) -> u64 {
    perm_width(n)
}
