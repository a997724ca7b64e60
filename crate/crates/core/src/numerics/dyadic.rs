//! Exact dyadic rationals `num · 2^(−exp)`.
//!
//! Gradients of the table-defined losses are sums of products of grid values
//! and interpolated table entries, all of which have power-of-two
//! denominators. Carrying them exactly and rounding once at the end keeps the
//! quantized gradient a well-defined function of the inputs.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            num: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        Dyadic {
            num: num.into(),
            exp,
        }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(v, 0)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn signum(&self) -> Ordering {
        self.num.sign().cmp(&num_bigint::Sign::NoSign)
    }

    fn rescaled(&self, exp: u32) -> BigInt {
        debug_assert!(exp >= self.exp);
        &self.num << (exp - self.exp)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let exp = self.exp.max(other.exp);
        Dyadic {
            num: self.rescaled(exp) + other.rescaled(exp),
            exp,
        }
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        let exp = self.exp.max(other.exp);
        Dyadic {
            num: self.rescaled(exp) - other.rescaled(exp),
            exp,
        }
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            num: &self.num * &other.num,
            exp: self.exp + other.exp,
        }
    }

    pub fn mul_int(&self, k: i64) -> Dyadic {
        Dyadic {
            num: &self.num * k,
            exp: self.exp,
        }
    }

    /// `(floor(self · 2^bits), remainder)` where the remainder is the
    /// fractional part expressed over `2^exp`.
    pub fn split_at_bits(&self, bits: u32) -> (BigInt, BigInt) {
        let scaled = &self.num << bits;
        let den = BigInt::one() << self.exp;
        scaled.div_mod_floor(&den)
    }

    /// `round(self · 2^scale / den)` with ties to even.
    pub fn round_div_to_scale(&self, den: u64, scale: u32) -> BigInt {
        assert!(den > 0);
        let num = &self.num << scale;
        let d = BigInt::from(den) << self.exp;
        let (q, r) = num.div_mod_floor(&d);
        let twice: BigInt = r * 2;
        match twice.cmp(&d) {
            Ordering::Less => q,
            Ordering::Greater => q + 1,
            Ordering::Equal => {
                if q.is_even() {
                    q
                } else {
                    q + 1
                }
            }
        }
    }

    /// `round(self · 2^scale)` with ties to even.
    pub fn round_to_scale(&self, scale: u32) -> BigInt {
        self.round_div_to_scale(1, scale)
    }

    pub fn to_f64(&self) -> f64 {
        // Keep at most 1000 bits so the conversion never overflows.
        let bits = self.num.bits();
        if bits > 1000 {
            let drop = bits - 1000;
            let top = (&self.num >> drop).to_f64().unwrap_or(0.0);
            return top * 2f64.powi(drop as i32 - self.exp as i32);
        }
        self.num.to_f64().unwrap_or(0.0) * 2f64.powi(-(self.exp as i32))
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let exp = self.exp.max(other.exp);
        self.rescaled(exp).cmp(&other.rescaled(exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_exact() {
        let a = Dyadic::new(3, 1); // 1.5
        let b = Dyadic::new(-5, 2); // -1.25
        assert_eq!(a.add(&b).to_f64(), 0.25);
        assert_eq!(a.sub(&b).to_f64(), 2.75);
        assert_eq!(a.mul(&b).to_f64(), -1.875);
        assert!(a > b);
        assert_eq!(Dyadic::new(2, 1), Dyadic::new(2, 1));
        assert_eq!(Dyadic::new(2, 1).cmp(&Dyadic::new(4, 2)), Ordering::Equal);
    }

    #[test]
    fn rounding() {
        // 1.5 -> 2, 2.5 -> 2, -2.5 -> -2
        assert_eq!(Dyadic::new(3, 1).round_to_scale(0), BigInt::from(2));
        assert_eq!(Dyadic::new(5, 1).round_to_scale(0), BigInt::from(2));
        assert_eq!(Dyadic::new(-5, 1).round_to_scale(0), BigInt::from(-2));
        // 1/3 at scale 2 -> round(4/3) = 1
        assert_eq!(Dyadic::from_int(1).round_div_to_scale(3, 2), BigInt::from(1));
        let (f, r) = Dyadic::new(-3, 2).split_at_bits(1); // -0.75*2 = -1.5
        assert_eq!(f, BigInt::from(-2));
        assert_eq!(r, BigInt::from(2)); // 0.5 over 2^2
    }
}
