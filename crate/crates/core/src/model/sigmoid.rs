//! Table sigmoid with exact linear interpolation.
//!
//! Knots sit every 1/16 on `[−16, 16]` and hold `σ` rounded to `2^−30`.
//! Between knots the value is the exact linear interpolant, so evaluating at a
//! dyadic point gives a dyadic result with no further rounding. Outside the
//! table the value is held at the end knots.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::numerics::Dyadic;

/// Fractional bits of the table values.
pub const TABLE_BITS: u32 = 30;
/// Knots per unit of input.
pub const KNOTS_PER_UNIT: u32 = 16;
/// Table covers `[−HALF_RANGE, HALF_RANGE]`.
pub const HALF_RANGE: i64 = 16;

const KNOT_SHIFT: u32 = KNOTS_PER_UNIT.trailing_zeros();
const CENTER: i64 = HALF_RANGE * KNOTS_PER_UNIT as i64;
const KNOTS: usize = 2 * CENTER as usize + 1;

/// `e^x` for `|x| ≤ 20` from correctly rounded `+ − × ÷` only.
///
/// Reduces by `ln 2` in two parts and sums a Taylor series, so the result does
/// not depend on the platform's libm.
pub fn portable_exp(x: f64) -> f64 {
    assert!(x.abs() <= 20.0, "portable_exp argument out of range");
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let k = (x * std::f64::consts::LOG2_E).round_ties_even();
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=22 {
        term = term * r / i as f64;
        sum += term;
    }
    let k = k as i64;
    sum * f64::from_bits(((1023 + k) as u64) << 52)
}

fn build_table() -> Vec<i64> {
    let one = 1i64 << TABLE_BITS;
    let mut right = Vec::with_capacity(CENTER as usize + 1);
    for k in 0..=CENTER {
        let z = k as f64 / KNOTS_PER_UNIT as f64;
        let s = 1.0 / (1.0 + portable_exp(-z));
        right.push((s * one as f64).round_ties_even() as i64);
    }
    // Mirror so that the table is exactly antisymmetric about 1/2.
    let mut t = vec![0i64; KNOTS];
    for k in 0..=CENTER as usize {
        t[CENTER as usize + k] = right[k];
        t[CENTER as usize - k] = one - right[k];
    }
    t
}

/// Knot values, index 0 at `z = −16`.
pub fn table() -> &'static [i64] {
    static TABLE: OnceLock<Vec<i64>> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Segment index of `z` (`None` below the table, `Some(KNOTS − 1)` above) and
/// the offset into the segment as a numerator over `2^z.exponent()`.
fn locate(z: &Dyadic) -> (Option<usize>, BigInt) {
    let (fl, rem) = z.split_at_bits(KNOT_SHIFT);
    let idx = fl.to_i64().map(|v| v.saturating_add(CENTER));
    match idx {
        Some(i) if (0..KNOTS as i64 - 1).contains(&i) => (Some(i as usize), rem),
        Some(i) if i < 0 => (None, BigInt::from(0)),
        None if fl.sign() == num_bigint::Sign::Minus => (None, BigInt::from(0)),
        _ => (Some(KNOTS - 1), BigInt::from(0)),
    }
}

/// `σ̃(z)`, exact.
pub fn sigmoid(z: &Dyadic) -> Dyadic {
    let t = table();
    match locate(z) {
        (None, _) => Dyadic::new(t[0], TABLE_BITS),
        (Some(k), _) if k == KNOTS - 1 => Dyadic::new(t[KNOTS - 1], TABLE_BITS),
        (Some(k), rem) => {
            let e = z.exponent();
            let num = (BigInt::from(t[k]) << e) + BigInt::from(t[k + 1] - t[k]) * rem;
            Dyadic::new(num, TABLE_BITS + e)
        }
    }
}

/// Slope of the segment containing `z` (right derivative at knots), 0 outside
/// the table.
pub fn sigmoid_slope(z: &Dyadic) -> Dyadic {
    let t = table();
    match locate(z) {
        (Some(k), _) if k < KNOTS - 1 => {
            Dyadic::new(t[k + 1] - t[k], TABLE_BITS - KNOT_SHIFT)
        }
        _ => Dyadic::zero(),
    }
}

/// Largest segment slope in the table.
pub fn max_slope() -> f64 {
    let t = table();
    let steepest = t.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    steepest as f64 * KNOTS_PER_UNIT as f64 / (1u64 << TABLE_BITS) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_libm() {
        for i in -2000..=2000 {
            let x = i as f64 / 100.0;
            let a = portable_exp(x);
            let b = x.exp();
            assert!(((a - b) / b).abs() < 2e-15, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn table_shape() {
        let t = table();
        assert_eq!(t.len(), 513);
        assert_eq!(t[256], 1 << 29);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..513 {
            assert_eq!(t[k] + t[512 - k], 1 << 30);
            let z = (k as f64 - 256.0) / 16.0;
            let want = 1.0 / (1.0 + (-z).exp()) * (1u64 << 30) as f64;
            assert!((t[k] as f64 - want).abs() <= 0.5 + 1e-6);
        }
        assert!(max_slope() <= 0.25 + 1e-7);
    }

    #[test]
    fn interpolation_is_exact() {
        let t = table();
        // z = 1/32 is halfway between knots 256 and 257.
        let z = Dyadic::new(1, 5);
        let v = sigmoid(&z);
        let expect = Dyadic::new(t[256] + t[257], TABLE_BITS + 1);
        assert_eq!(v.cmp(&expect), std::cmp::Ordering::Equal);
        // Knots are hit exactly.
        let z = Dyadic::new(-3, 0);
        assert_eq!(
            sigmoid(&z).cmp(&Dyadic::new(t[256 - 48], TABLE_BITS)),
            std::cmp::Ordering::Equal
        );
        assert!((sigmoid(&Dyadic::new(7, 3)).to_f64() - 0.7057).abs() < 1e-3);
    }

    #[test]
    fn clamps_outside_the_table() {
        let t = table();
        let far = Dyadic::new(1_000_000, 2);
        assert_eq!(sigmoid(&far).to_f64(), t[512] as f64 / (1u64 << 30) as f64);
        let far_neg = Dyadic::new(-1_000_000, 2);
        assert_eq!(sigmoid(&far_neg).to_f64(), t[0] as f64 / (1u64 << 30) as f64);
        assert!(sigmoid_slope(&far).is_zero());
        assert!(sigmoid_slope(&far_neg).is_zero());
        assert!(sigmoid_slope(&Dyadic::new(16, 0)).is_zero());
        assert!(!sigmoid_slope(&Dyadic::new(0, 0)).is_zero());
    }

    #[test]
    fn antisymmetric_everywhere() {
        for num in [-977i64, -33, -1, 1, 5, 100, 513, 4097] {
            let z = Dyadic::new(num, 6);
            let neg = Dyadic::new(-num, 6);
            let sum = sigmoid(&z).add(&sigmoid(&neg));
            assert_eq!(sum.cmp(&Dyadic::from_int(1)), std::cmp::Ordering::Equal);
        }
    }
}
