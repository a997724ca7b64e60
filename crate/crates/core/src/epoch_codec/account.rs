//! Per-epoch bit accounting against the bounds the encoding is built on.

use std::f64::consts::{E, LN_2, PI};
use std::fmt::Write as _;

use super::code::{baseline_bits, EncodedEpoch};
use super::select::Case;
use super::EpochCodecError;
use crate::codec::header_width;
use crate::engine::{format_rational, measure_local_progress, EpochTrace};
use crate::numerics::log2_factorial;
use crate::Rational;

fn f(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Guaranteed ceiling on a split code at `j`, excluding any embedded
/// checkpoint:
///
/// `log2 n! − 2n·max(γ(λ′−λ)², (1−γ)(λ″−λ)²) + 4(n/b + 2)·log2 n`
///
/// with `γ = (j−1)b/n`. The subset code for the seen set and for its
/// complement have the same width, so both deviations apply.
pub fn case1_bound(trace: &EpochTrace, j: usize) -> f64 {
    let (n, b) = (trace.n as f64, trace.b as f64);
    let s = trace.stat(j);
    let gamma = (j - 1) as f64 * b / n;
    let lam = f(s.lambda);
    let l1 = s.lambda_prime.map(f).unwrap_or(lam);
    let l2 = s.lambda_doubleprime.map(f).unwrap_or(lam);
    let dev = (gamma * (l1 - lam).powi(2)).max((1.0 - gamma) * (l2 - lam).powi(2));
    log2_factorial(trace.n as u64) - 2.0 * n * dev + 4.0 * (n / b + 2.0) * n.log2()
}

/// Guaranteed ceiling on a backward code: the tag bit plus, for every batch,
///
/// `b·log2 n_{j−1} − 2b(φ_j − λ′_j)² + ⌈log2(b+1)⌉ + 3 + ½·log2(2πb) + 1/(12b·ln 2)`
///
/// where `n_{j−1} = (j−1)b` is the pool the batch is drawn from. The last
/// three terms cover the rank ceilings and the Stirling remainder of `log2 b!`.
pub fn case2_bound(trace: &EpochTrace) -> f64 {
    let b = trace.b as f64;
    let per_batch_overhead =
        header_width(trace.b) as f64 + 3.0 + 0.5 * (2.0 * PI * b).log2() + 1.0 / (12.0 * b * LN_2);
    let mut total = 1.0;
    for j in 2..=trace.steps() + 1 {
        let s = trace.stat(j);
        let phi = f(s.phi.expect("defined for j ≥ 2"));
        let l1 = f(s.lambda_prime.expect("defined for j ≥ 2"));
        let pool = ((j - 1) * trace.b) as f64;
        total += b * pool.log2() - 2.0 * b * (phi - l1).powi(2) + per_batch_overhead;
    }
    total
}

/// `Σ_{j=2}^{n/b+1} (φ_j − λ′_j)²`.
fn divergence_sum(trace: &EpochTrace) -> f64 {
    (2..=trace.steps() + 1)
        .map(|j| {
            let s = trace.stat(j);
            f(s.phi.expect("j ≥ 2") - s.lambda_prime.expect("j ≥ 2")).powi(2)
        })
        .sum()
}

/// Positions `j ∈ [2, n/b − 1]` where `acc(W_j, B_j) < λ″_j − β/4`.
fn batch_shortfalls(trace: &EpochTrace, beta: Rational) -> usize {
    let m = trace.steps();
    (2..m)
        .filter(|&j| {
            let s = trace.stat(j);
            let before = s.batch_acc_before.expect("j ≤ n/b");
            let unseen = s.lambda_doubleprime.expect("j ≤ n/b");
            before < unseen - beta / 4
        })
        .count()
}

/// One row of the compression report.
#[derive(Clone, Debug, PartialEq)]
pub struct AccountingRow {
    pub epoch: usize,
    pub mode: &'static str,
    pub case: Case,
    pub j_s: usize,
    pub j_f: usize,
    pub degenerate_window: bool,
    pub gap: Option<Rational>,
    pub measured_bits: u64,
    /// Measured bits minus any checkpoint and preimage indices written into
    /// the stream.
    pub code_bits: u64,
    /// `⌈log2 n!⌉`.
    pub baseline_bits: u64,
    /// Bits of generator output the shuffle actually consumed.
    pub tape_bits: u64,
    pub tag_bits: u64,
    pub j_bits: u64,
    pub embedded_model_bits: u64,
    pub set_header_bits: u64,
    pub set_payload_bits: u64,
    pub perm_bits: u64,
    pub hint_bits: u64,
    /// Ceiling for the chosen case (`case1_bound` or `case2_bound`).
    pub case_bound: f64,
    pub case_bound_holds: bool,
    /// `n(log2(n/e) − β³/512)` at the configured `β`.
    pub per_epoch_target: f64,
    /// `n·log2(n/e) − 2b·Σ(φ − λ′)²`.
    pub backward_estimate: f64,
    pub divergence_sum: f64,
    /// `nβ̂²/25b`.
    pub divergence_floor: f64,
    /// `Some(Σ(φ−λ′)² ≥ nβ̂²/25b)` when its hypotheses hold at `β̂`.
    pub divergence_check: Option<bool>,
    /// Which hypothesis failed, when `divergence_check` is `None`.
    pub divergence_note: String,
    /// Count of `j` with `acc(W_j, B_j) < λ″_j − β/4` at the configured `β`.
    pub batch_shortfalls: usize,
    pub beta: Rational,
    pub beta_hat: Rational,
    /// `β̂ > β`.
    pub good: bool,
    /// Measured bits for good epochs, the baseline for bad ones.
    pub charged_bits: u64,
    /// `d·⌈log2(2R·2^s + 1)⌉`, the cost of writing a checkpoint.
    pub model_charge: u64,
    /// `model_charge ≤ nβ³/512`.
    pub model_charge_within_target: bool,
}

impl AccountingRow {
    pub fn savings(&self) -> i64 {
        self.baseline_bits as i64 - self.charged_bits as i64
    }

    pub fn to_csv(&self) -> String {
        let opt_r = |r: &Option<Rational>| r.as_ref().map(format_rational).unwrap_or_default();
        let opt_b = |b: Option<bool>| b.map(|v| (v as u8).to_string()).unwrap_or_default();
        let j = match self.case {
            Case::Split { j } => j.to_string(),
            Case::Backward => String::new(),
        };
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{},{:.6},{:.6},{:.9},{:.9},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.mode,
            self.case.tag(),
            j,
            self.j_s,
            self.j_f,
            self.degenerate_window as u8,
            opt_r(&self.gap),
            self.measured_bits,
            self.code_bits,
            self.baseline_bits,
            self.tape_bits,
            self.tag_bits,
            self.j_bits,
            self.embedded_model_bits,
            self.set_header_bits,
            self.set_payload_bits,
            self.perm_bits,
            self.hint_bits,
            self.case_bound,
            self.case_bound_holds as u8,
            self.per_epoch_target,
            self.backward_estimate,
            self.divergence_sum,
            self.divergence_floor,
            opt_b(self.divergence_check),
            self.divergence_note,
            self.batch_shortfalls,
            format_rational(&self.beta),
            format_rational(&self.beta_hat),
            self.good as u8,
            self.charged_bits,
            self.savings(),
            self.model_charge,
            self.model_charge_within_target as u8,
        )
        .expect("string");
        s
    }
}

/// Column names of [`AccountingRow::to_csv`].
pub const ACCOUNTING_HEADER: &str = "epoch,mode,case,split_j,j_s,j_f,degenerate_window,gap,\
measured_bits,code_bits,baseline_bits,tape_bits,tag_bits,j_bits,embedded_model_bits,\
set_header_bits,set_payload_bits,perm_bits,hint_bits,case_bound,case_bound_holds,per_epoch_target,\
backward_estimate,divergence_sum,divergence_floor,divergence_check,divergence_note,\
batch_shortfalls,beta,beta_hat,good,charged_bits,savings,model_charge,\
model_charge_within_target";

/// Account for one encoded epoch. `model_bits` is the per-epoch checkpoint
/// charge.
pub fn epoch_accounting(
    enc: &EncodedEpoch,
    trace: &EpochTrace,
    beta: Rational,
    model_bits: u64,
) -> Result<AccountingRow, EpochCodecError> {
    let beta_hat = measure_local_progress(trace)?;
    let n = trace.n as f64;
    let b = trace.b as f64;
    let w = enc.widths;
    let measured = enc.code.measured_bits();
    debug_assert_eq!(measured, w.total());
    let code_bits = measured - w.model - w.hint;
    let case_bound = match enc.selector.case {
        Case::Split { j } => case1_bound(trace, j),
        Case::Backward => case2_bound(trace),
    };
    let div = divergence_sum(trace);
    let bh = f(beta_hat);
    let floor = n * bh * bh / (25.0 * b);

    // Hypotheses of the divergence bound, instantiated at β̂.
    let mut failed = Vec::new();
    if bh <= 0.0 {
        failed.push("no local progress");
    } else {
        let probe = super::select::select_case(trace, beta_hat)?;
        if probe.case != Case::Backward {
            failed.push("seen/unseen gap reaches beta_hat/4");
        }
        if batch_shortfalls(trace, beta_hat) > 0 {
            failed.push("batch accuracy below unseen accuracy - beta_hat/4");
        }
        if bh * n / (20.0 * b) < 1.0 {
            failed.push("n too small for beta_hat");
        }
    }
    let divergence_check = failed.is_empty().then_some(div >= floor);

    let baseline = baseline_bits(trace.n);
    let good = beta_hat > beta;
    let bf = f(beta);
    Ok(AccountingRow {
        epoch: trace.epoch,
        mode: enc.mode.name(),
        case: enc.selector.case,
        j_s: enc.selector.j_s,
        j_f: enc.selector.j_f,
        degenerate_window: enc.selector.degenerate,
        gap: enc.selector.gap,
        measured_bits: measured,
        code_bits,
        baseline_bits: baseline,
        tape_bits: trace.permutation.source_bits() as u64,
        tag_bits: w.tag,
        j_bits: w.j_field,
        embedded_model_bits: w.model,
        set_header_bits: w.set_header,
        set_payload_bits: w.set_payload,
        perm_bits: w.perm,
        hint_bits: w.hint,
        case_bound,
        case_bound_holds: code_bits as f64 <= case_bound,
        per_epoch_target: n * ((n / E).log2() - bf.powi(3) / 512.0),
        backward_estimate: n * (n / E).log2() - 2.0 * b * div,
        divergence_sum: div,
        divergence_floor: floor,
        divergence_check,
        divergence_note: failed.join("; "),
        batch_shortfalls: batch_shortfalls(trace, beta),
        beta,
        beta_hat,
        good,
        charged_bits: if good { measured } else { baseline },
        model_charge: model_bits,
        model_charge_within_target: (model_bits as f64) <= n * bf.powi(3) / 512.0,
    })
}

/// Outcome of checking `β̂ ≤ (4/3)·ε·(1 + ln(n/b))`.
#[derive(Clone, Debug, PartialEq)]
pub enum CeilingVerdict {
    /// Some checkpoint had accuracy below `1 − ε`, or the epoch is
    /// incomplete.
    Skipped { reason: String },
    Checked {
        beta_hat: f64,
        ceiling: f64,
        holds: bool,
    },
}

impl CeilingVerdict {
    pub fn holds(&self) -> Option<bool> {
        match self {
            CeilingVerdict::Skipped { .. } => None,
            CeilingVerdict::Checked { holds, .. } => Some(*holds),
        }
    }
}

/// Check the local-progress ceiling for an epoch whose checkpoints all have
/// accuracy at least `1 − ε`.
pub fn check_eps_beta_ceiling(trace: &EpochTrace, eps: Rational) -> CeilingVerdict {
    if !trace.is_complete() {
        return CeilingVerdict::Skipped {
            reason: format!("epoch {} incomplete", trace.epoch),
        };
    }
    let floor = Rational::from_integer(1) - eps;
    if let Some(s) = trace.stats.iter().find(|s| s.lambda < floor) {
        return CeilingVerdict::Skipped {
            reason: format!(
                "accuracy {} at j = {} is below 1 - eps",
                format_rational(&s.lambda),
                s.j
            ),
        };
    }
    let beta_hat = f(measure_local_progress(trace).expect("complete"));
    let ceiling = 4.0 / 3.0 * f(eps) * (1.0 + (trace.n as f64 / trace.b as f64).ln());
    CeilingVerdict::Checked {
        beta_hat,
        ceiling,
        holds: beta_hat <= ceiling,
    }
}
