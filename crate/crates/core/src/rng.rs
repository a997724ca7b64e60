//! Deterministic random words and the samplers built on them.
//!
//! Every random choice in a run is drawn from ChaCha8 one 64-bit word at a
//! time. Recording the words consumed gives the exact random tape behind an
//! epoch's permutation, and replaying a tape reproduces the permutation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A source of 64-bit words.
pub trait WordSource {
    /// Next word, or `None` when a finite tape is exhausted.
    fn next_word(&mut self) -> Option<u64>;
}

/// ChaCha8 stream that remembers every word it hands out.
#[derive(Clone, Debug)]
pub struct RecordingRng {
    inner: ChaCha8Rng,
    tape: Vec<u64>,
}

impl RecordingRng {
    /// Stream `stream` of the generator seeded with `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RecordingRng {
            inner,
            tape: Vec::new(),
        }
    }

    pub fn tape(&self) -> &[u64] {
        &self.tape
    }

    pub fn into_tape(self) -> Vec<u64> {
        self.tape
    }
}

impl WordSource for RecordingRng {
    fn next_word(&mut self) -> Option<u64> {
        let w = self.inner.next_u64();
        self.tape.push(w);
        Some(w)
    }
}

/// Plain ChaCha8 stream, for data generation where no tape is needed.
#[derive(Clone, Debug)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        StreamRng(inner)
    }
}

impl WordSource for StreamRng {
    fn next_word(&mut self) -> Option<u64> {
        Some(self.0.next_u64())
    }
}

/// Replays a recorded tape.
#[derive(Clone, Debug)]
pub struct TapeReplay<'a> {
    words: &'a [u64],
    pos: usize,
}

impl<'a> TapeReplay<'a> {
    pub fn new(words: &'a [u64]) -> Self {
        TapeReplay { words, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl WordSource for TapeReplay<'_> {
    fn next_word(&mut self) -> Option<u64> {
        let w = self.words.get(self.pos).copied();
        self.pos += w.is_some() as usize;
        w
    }
}

/// Uniform integer in `[0, range)` by Lemire's multiply-and-reject method.
pub fn bounded<S: WordSource + ?Sized>(src: &mut S, range: u64) -> Option<u64> {
    assert!(range > 0);
    let mut m = src.next_word()? as u128 * range as u128;
    if (m as u64) < range {
        let threshold = range.wrapping_neg() % range;
        while (m as u64) < threshold {
            m = src.next_word()? as u128 * range as u128;
        }
    }
    Some((m >> 64) as u64)
}

/// Fisher–Yates shuffle of `0..n`, swapping from the back.
pub fn shuffle<S: WordSource + ?Sized>(src: &mut S, n: usize) -> Option<Vec<u32>> {
    let mut order: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = bounded(src, i as u64 + 1)? as usize;
        order.swap(i, j);
    }
    Some(order)
}

/// Uniform `f64` in `[0, 1)` with 53 random bits.
pub fn uniform<S: WordSource + ?Sized>(src: &mut S) -> Option<f64> {
    Some((src.next_word()? >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// Approximate standard normal: the sum of twelve uniforms minus six.
///
/// Only additions are involved, so the value is identical on every platform.
pub fn gaussian<S: WordSource + ?Sized>(src: &mut S) -> Option<f64> {
    let mut acc = 0.0;
    for _ in 0..12 {
        acc += uniform(src)?;
    }
    Some(acc - 6.0)
}
