//! Forward SGD: epoch shuffles, batch steps and per-step statistics.

use std::fmt::Write as _;

use super::config::{format_rational, RunConfig};
use super::EngineError;
use crate::model::{Dataset, Element, Model};
use crate::numerics::FixedVector;
use crate::rng::{shuffle, RecordingRng, TapeReplay};
use crate::Rational;

/// One epoch's shuffle together with the random words that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochPermutation {
    /// 1-based epoch index.
    pub epoch: usize,
    /// `order[k]` is the id visited at position `k`.
    pub order: Vec<u32>,
    /// Every 64-bit word the shuffle consumed, in order.
    pub source_words: Vec<u64>,
}

impl EpochPermutation {
    /// Fisher–Yates over `0..n` driven by stream `epoch` of the ChaCha8
    /// generator seeded with `seed`.
    pub fn draw(seed: u64, epoch: usize, n: usize) -> Self {
        let mut rng = RecordingRng::new(seed, epoch as u64);
        let order = shuffle(&mut rng, n).expect("unbounded stream");
        EpochPermutation {
            epoch,
            order,
            source_words: rng.into_tape(),
        }
    }

    /// Rebuild the order from the recorded words alone.
    pub fn regenerate(epoch: usize, n: usize, words: &[u64]) -> Result<Self, EngineError> {
        let mut replay = TapeReplay::new(words);
        let order = shuffle(&mut replay, n)
            .ok_or_else(|| EngineError::Config("random tape too short for the shuffle".into()))?;
        if replay.consumed() != words.len() {
            return Err(EngineError::Config("random tape has unused words".into()));
        }
        Ok(EpochPermutation {
            epoch,
            order,
            source_words: words.to_vec(),
        })
    }

    pub fn source_bits(&self) -> usize {
        64 * self.source_words.len()
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        self.order.len() == n
            && self.order.iter().all(|&id| {
                let fresh = (id as usize) < n && !seen[id as usize];
                if fresh {
                    seen[id as usize] = true;
                }
                fresh
            })
    }

    /// Batch `j` (1-based) as ids in visiting order.
    pub fn batch(&self, b: usize, j: usize) -> &[u32] {
        &self.order[(j - 1) * b..j * b]
    }
}

/// Statistics of checkpoint `W_{i,j}`. Undefined entries are `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepStats {
    pub j: usize,
    /// `λ = acc(W_{i,j}, X)`.
    pub lambda: Rational,
    /// `λ′ = acc(W_{i,j}, X_{i,j−1})`, for `j ≥ 2`.
    pub lambda_prime: Option<Rational>,
    /// `λ″ = acc(W_{i,j}, X ∖ X_{i,j−1})`, for `j ≤ n/b`.
    pub lambda_doubleprime: Option<Rational>,
    /// `φ = acc(W_{i,j}, B_{i,j−1})`, for `j ≥ 2`.
    pub phi: Option<Rational>,
    /// `acc(W_{i,j}, B_{i,j})` before the step on that batch, for `j ≤ n/b`.
    pub batch_acc_before: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub n: usize,
    pub b: usize,
    pub permutation: EpochPermutation,
    /// `W_{i,1}, W_{i,2}, …`; `n/b + 1` entries when the epoch completed.
    pub checkpoints: Vec<FixedVector>,
    /// `acc(W_{i,j}, x)` for every checkpoint, indexed by id.
    pub correct: Vec<Vec<bool>>,
    pub stats: Vec<StepStats>,
    /// The `j` at which `acc(W_{i,j}, X) ≥ 1 − ε` held before the step.
    pub terminated_at: Option<usize>,
}

impl EpochTrace {
    pub fn steps(&self) -> usize {
        self.n / self.b
    }

    pub fn is_complete(&self) -> bool {
        self.terminated_at.is_none() && self.checkpoints.len() == self.steps() + 1
    }

    pub fn batch(&self, j: usize) -> &[u32] {
        self.permutation.batch(self.b, j)
    }

    /// `X_{i,j}` as a sorted id list.
    pub fn prefix_set(&self, j: usize) -> Vec<u32> {
        let mut s = self.permutation.order[..j * self.b].to_vec();
        s.sort_unstable();
        s
    }

    /// Checkpoint `W_{i,j}`.
    pub fn checkpoint(&self, j: usize) -> &FixedVector {
        &self.checkpoints[j - 1]
    }

    /// `acc(W_{i,j}, •)` as a bitmap by id.
    pub fn correct_at(&self, j: usize) -> &[bool] {
        &self.correct[j - 1]
    }

    pub fn stat(&self, j: usize) -> &StepStats {
        &self.stats[j - 1]
    }

    pub fn final_checkpoint(&self) -> &FixedVector {
        self.checkpoints.last().expect("at least W_{i,1}")
    }

    /// A complete trace over `perm` with the given `n/b + 1` checkpoints in
    /// place of actual training. Statistics are computed as in a run.
    pub fn from_checkpoints(
        model: &Model,
        data: &Dataset,
        perm: &EpochPermutation,
        b: usize,
        checkpoints: Vec<FixedVector>,
    ) -> Result<Self, EngineError> {
        let n = data.len();
        if !perm.is_valid_for(n) || b < 2 || !n.is_multiple_of(b) || checkpoints.len() != n / b + 1 {
            return Err(EngineError::Config(format!(
                "need a permutation of 0..{n}, b dividing n and {} checkpoints",
                n / b.max(1) + 1
            )));
        }
        let mut correct = Vec::with_capacity(checkpoints.len());
        let mut stats = Vec::with_capacity(checkpoints.len());
        for (k, w) in checkpoints.iter().enumerate() {
            let c = model.with_weights(w.clone())?.correctness(data)?;
            stats.push(stats_for(&perm.order, b, k + 1, &c));
            correct.push(c);
        }
        Ok(EpochTrace {
            epoch: perm.epoch,
            n,
            b,
            permutation: perm.clone(),
            checkpoints,
            correct,
            stats,
            terminated_at: None,
        })
    }
}

fn frac(hits: usize, total: usize) -> Option<Rational> {
    (total > 0).then(|| Rational::new(hits as i64, total as i64))
}

fn stats_for(order: &[u32], b: usize, j: usize, correct: &[bool]) -> StepStats {
    let n = order.len();
    let m = n / b;
    let seen = &order[..(j - 1) * b];
    let hits = |ids: &[u32]| ids.iter().filter(|&&id| correct[id as usize]).count();
    let total_hits = correct.iter().filter(|&&c| c).count();
    let seen_hits = hits(seen);
    StepStats {
        j,
        lambda: Rational::new(total_hits as i64, n as i64),
        lambda_prime: if j >= 2 { frac(seen_hits, seen.len()) } else { None },
        lambda_doubleprime: if j <= m {
            frac(total_hits - seen_hits, n - seen.len())
        } else {
            None
        },
        phi: if j >= 2 {
            frac(hits(&order[(j - 2) * b..(j - 1) * b]), b)
        } else {
            None
        },
        batch_acc_before: if j <= m {
            frac(hits(&order[(j - 1) * b..j * b]), b)
        } else {
            None
        },
    }
}

/// Run one epoch of batch steps over `perm`, checking termination before
/// every step.
pub fn run_epoch(
    model: &Model,
    data: &Dataset,
    perm: &EpochPermutation,
    cfg: &RunConfig,
) -> Result<(EpochTrace, Model), EngineError> {
    let n = data.len();
    let b = cfg.batch;
    if !perm.is_valid_for(n) {
        return Err(EngineError::Config(format!(
            "epoch {} order is not a permutation of 0..{n}",
            perm.epoch
        )));
    }
    if !n.is_multiple_of(b) || b < 2 {
        return Err(EngineError::Config(format!("batch size {b} must divide n = {n}")));
    }
    let m = n / b;
    let target = Rational::from_integer(1) - cfg.epsilon;
    let mut current = model.clone();
    let mut trace = EpochTrace {
        epoch: perm.epoch,
        n,
        b,
        permutation: perm.clone(),
        checkpoints: Vec::with_capacity(m + 1),
        correct: Vec::with_capacity(m + 1),
        stats: Vec::with_capacity(m + 1),
        terminated_at: None,
    };
    for j in 1..=m + 1 {
        let correct = current.correctness(data)?;
        let stats = stats_for(&perm.order, b, j, &correct);
        let done = stats.lambda >= target;
        trace.checkpoints.push(current.weights().clone());
        trace.correct.push(correct);
        trace.stats.push(stats);
        if j == m + 1 {
            break;
        }
        if done {
            trace.terminated_at = Some(j);
            break;
        }
        let batch: Vec<&Element> = data.select(perm.batch(b, j))?;
        current = current.step(&batch, cfg.alpha).map_err(|e| EngineError::Step {
            epoch: perm.epoch,
            j,
            source: e,
        })?;
    }
    Ok((trace, current))
}

/// Outcome of a whole run.
#[derive(Clone, Debug)]
pub struct RunResult {
    /// All epochs that were started, the last possibly terminated early.
    pub traces: Vec<EpochTrace>,
    pub final_model: Model,
    pub terminated: bool,
}

impl RunResult {
    pub fn completed(&self) -> impl Iterator<Item = &EpochTrace> {
        self.traces.iter().filter(|t| t.is_complete())
    }
}

/// Run epochs until termination or `max_epochs`.
pub fn run(cfg: &RunConfig, data: &Dataset, init: Model) -> Result<RunResult, EngineError> {
    cfg.check_shape()?;
    let mut model = init;
    let mut traces = Vec::new();
    let mut terminated = false;
    for epoch in 1..=cfg.max_epochs {
        let perm = EpochPermutation::draw(cfg.seed, epoch, data.len());
        let (trace, next) = run_epoch(&model, data, &perm, cfg)?;
        model = next;
        terminated = trace.terminated_at.is_some();
        traces.push(trace);
        if terminated {
            break;
        }
    }
    if !terminated {
        // The end-of-run model may already satisfy the condition.
        let acc = model.accuracy(data.elements())?;
        terminated = acc >= Rational::from_integer(1) - cfg.epsilon;
    }
    Ok(RunResult {
        traces,
        final_model: model,
        terminated,
    })
}

/// `β̂ = (b/n)·Σ_{j=2}^{n/b+1} (φ_{i,j} − acc(W_{i,j−1}, B_{i,j−1}))`.
pub fn measure_local_progress(trace: &EpochTrace) -> Result<Rational, EngineError> {
    if !trace.is_complete() {
        return Err(EngineError::Incomplete(trace.epoch));
    }
    let m = trace.steps();
    let mut sum = Rational::from_integer(0);
    for j in 2..=m + 1 {
        let after = trace.stat(j).phi.expect("defined for j ≥ 2");
        let before = trace.stat(j - 1).batch_acc_before.expect("defined for j ≤ n/b");
        sum += after - before;
    }
    Ok(sum * Rational::new(trace.b as i64, trace.n as i64))
}

/// Trace rows as CSV with the header
/// `epoch,j,lambda,lambda_prime,lambda_doubleprime,phi,batch_acc_before,terminated`.
pub fn traces_to_csv<'a>(traces: impl IntoIterator<Item = &'a EpochTrace>) -> String {
    let mut out =
        String::from("epoch,j,lambda,lambda_prime,lambda_doubleprime,phi,batch_acc_before,terminated\n");
    let opt = |r: &Option<Rational>| r.as_ref().map(format_rational).unwrap_or_default();
    for t in traces {
        for s in &t.stats {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.epoch,
                s.j,
                format_rational(&s.lambda),
                opt(&s.lambda_prime),
                opt(&s.lambda_doubleprime),
                opt(&s.phi),
                opt(&s.batch_acc_before),
                (t.terminated_at == Some(s.j)) as u8
            )
            .expect("string");
        }
    }
    out
}
