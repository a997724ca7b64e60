//! `log2(n!)` from exact big integers.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

/// `log2(x)` for `x > 0`, from the top 64 bits of the exact value.
///
/// Relative error is a few ulps of `f64`; for `n!` with `n ≤ 10^5` that is far
/// below 1e−9 bits.
pub fn log2_big(x: &BigUint) -> f64 {
    assert!(x.bits() > 0, "log2 of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("64 bits");
    (top as f64).log2() + shift as f64
}

/// Exact `n!`.
pub fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// `log2(n!)` computed from the exact factorial.
pub fn log2_factorial(n: u64) -> f64 {
    log2_big(&factorial(n))
}

/// `log2(k!)` for every `k ≤ max`, in one pass.
pub fn log2_factorial_table(max: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut acc = BigUint::one();
    out.push(0.0);
    for k in 1..=max {
        acc *= k;
        out.push(log2_big(&acc));
    }
    out
}

/// `⌈log2 x⌉` for `x ≥ 1`: the width of a field holding values in `[0, x)`.
pub fn ceil_log2_big(x: &BigUint) -> u64 {
    assert!(x.bits() > 0, "ceil_log2 of zero");
    (x - 1u32).bits()
}

/// `⌈log2 x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x > 0, "ceil_log2 of zero");
    64 - (x - 1).leading_zeros()
}

/// Leading Stirling terms `n·log2(n/e) + ½·log2(2πn)`.
pub fn stirling_log2_factorial(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    n * (n / std::f64::consts::E).log2() + 0.5 * (2.0 * std::f64::consts::PI * n).log2()
}
