//! Fixed-point grid arithmetic.
//!
//! A value on the grid is an integer mantissa `raw` interpreted as
//! `raw · 2^(−s)`. The grid is bounded: every mantissa lives in
//! `[−R·2^s, R·2^s]`. Operations that would leave this range clip to the
//! boundary and record the event in a [`Saturation`] accumulator, they never
//! wrap around.
//!
//! All arithmetic is integer arithmetic with a single round-half-to-even at
//! the end of each operation, so results are bit-identical on every platform.

use std::fmt;

use super::NumericsError;

/// Largest supported scale. Keeps every product of two mantissas and the
/// exact gradient numerators comfortably inside `i128`.
pub const MAX_SCALE: u32 = 24;

/// Scalar on a [`Grid`]. Only the mantissa is stored; the scale is global.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedScalar(i64);

impl FixedScalar {
    pub const ZERO: FixedScalar = FixedScalar(0);

    pub const fn from_raw(raw: i64) -> Self {
        FixedScalar(raw)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }
}

impl fmt::Display for FixedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Model parameters `W ∈ 𝔽^d`. The dimension is fixed at construction.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedVector(Vec<FixedScalar>);

impl FixedVector {
    pub fn zeros(d: usize) -> Self {
        FixedVector(vec![FixedScalar::ZERO; d])
    }

    pub fn from_raw(raw: impl IntoIterator<Item = i64>) -> Self {
        FixedVector(raw.into_iter().map(FixedScalar::from_raw).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[FixedScalar] {
        &self.0
    }

    pub fn get(&self, i: usize) -> FixedScalar {
        self.0[i]
    }

    pub fn raw(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().map(|x| x.raw())
    }

    pub fn to_raw_vec(&self) -> Vec<i64> {
        self.raw().collect()
    }

    /// Squared Euclidean distance in raw units (grid steps²).
    pub fn raw_dist2(&self, other: &FixedVector) -> i128 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = (a.raw() - b.raw()) as i128;
                d * d
            })
            .sum()
    }
}

impl fmt::Display for FixedVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("]")
    }
}

/// Records clipping events. Operations never fail on overflow; callers decide
/// whether a raised flag is fatal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Saturation {
    count: u64,
}

impl Saturation {
    pub fn raised(&self) -> bool {
        self.count > 0
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn hit(&mut self) {
        self.count += 1;
    }
}

/// The finite grid `𝔽`: scale `s` and clip radius `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    scale: u32,
    clip: i64,
}

impl Grid {
    pub fn new(scale: u32, clip: i64) -> Result<Self, NumericsError> {
        if scale > MAX_SCALE {
            return Err(NumericsError::Config(format!(
                "scale {scale} exceeds the supported maximum {MAX_SCALE}"
            )));
        }
        if !(1..=(1 << 20)).contains(&clip) {
            return Err(NumericsError::Config(format!(
                "clip radius {clip} outside [1, 2^20]"
            )));
        }
        Ok(Grid { scale, clip })
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn clip(&self) -> i64 {
        self.clip
    }

    /// Raw mantissa of 1.0.
    pub fn one_raw(&self) -> i64 {
        1i64 << self.scale
    }

    /// Largest admissible mantissa, `R·2^s`.
    pub fn max_raw(&self) -> i64 {
        self.clip << self.scale
    }

    /// Number of grid values per coordinate.
    pub fn values_per_coordinate(&self) -> u64 {
        2 * self.max_raw() as u64 + 1
    }

    /// Bits needed to write one coordinate explicitly: `⌈log2(2R·2^s + 1)⌉`.
    pub fn coordinate_bits(&self) -> u32 {
        let v = self.values_per_coordinate();
        64 - (v - 1).leading_zeros()
    }

    pub fn contains(&self, raw: i64) -> bool {
        raw.abs() <= self.max_raw()
    }

    /// Clamp an exact mantissa into range, flagging when it had to clip.
    pub fn clamp(&self, raw: i128, sat: &mut Saturation) -> FixedScalar {
        let m = self.max_raw() as i128;
        if raw > m {
            sat.hit();
            FixedScalar(m as i64)
        } else if raw < -m {
            sat.hit();
            FixedScalar(-m as i64)
        } else {
            FixedScalar(raw as i64)
        }
    }

    /// Nearest grid value (ties to even), saturating.
    pub fn from_f64(&self, v: f64, sat: &mut Saturation) -> FixedScalar {
        let scaled = v * self.one_raw() as f64;
        if !scaled.is_finite() {
            sat.hit();
            return if scaled > 0.0 {
                FixedScalar(self.max_raw())
            } else {
                FixedScalar(-self.max_raw())
            };
        }
        let r = scaled.round_ties_even();
        let bound = (self.max_raw() as f64) + 1.0;
        if r.abs() >= bound {
            sat.hit();
            return FixedScalar(if r > 0.0 { self.max_raw() } else { -self.max_raw() });
        }
        self.clamp(r as i128, sat)
    }

    pub fn to_f64(&self, x: FixedScalar) -> f64 {
        x.raw() as f64 / self.one_raw() as f64
    }

    pub fn add(&self, a: FixedScalar, b: FixedScalar, sat: &mut Saturation) -> FixedScalar {
        self.clamp(a.raw() as i128 + b.raw() as i128, sat)
    }

    pub fn sub(&self, a: FixedScalar, b: FixedScalar, sat: &mut Saturation) -> FixedScalar {
        self.clamp(a.raw() as i128 - b.raw() as i128, sat)
    }

    pub fn mul(&self, a: FixedScalar, b: FixedScalar, sat: &mut Saturation) -> FixedScalar {
        let p = a.raw() as i128 * b.raw() as i128;
        self.clamp(round_shift(p, self.scale), sat)
    }

    /// Exact dot product rounded once.
    pub fn dot(&self, a: &[FixedScalar], b: &[FixedScalar], sat: &mut Saturation) -> FixedScalar {
        let acc: i128 = a
            .iter()
            .zip(b)
            .map(|(x, y)| x.raw() as i128 * y.raw() as i128)
            .sum();
        self.clamp(round_shift(acc, self.scale), sat)
    }

    pub fn add_vec(&self, a: &FixedVector, b: &FixedVector, sat: &mut Saturation) -> FixedVector {
        FixedVector(
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| self.add(*x, *y, sat))
                .collect(),
        )
    }

    pub fn sub_vec(&self, a: &FixedVector, b: &FixedVector, sat: &mut Saturation) -> FixedVector {
        FixedVector(
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| self.sub(*x, *y, sat))
                .collect(),
        )
    }
}

/// `round(num / 2^shift)`, ties to even.
pub fn round_shift(num: i128, shift: u32) -> i128 {
    if shift == 0 {
        return num;
    }
    let floor = num >> shift;
    let rem = num - (floor << shift);
    let half = 1i128 << (shift - 1);
    match rem.cmp(&half) {
        std::cmp::Ordering::Less => floor,
        std::cmp::Ordering::Greater => floor + 1,
        std::cmp::Ordering::Equal => {
            if floor & 1 == 0 {
                floor
            } else {
                floor + 1
            }
        }
    }
}

/// `round(num / den)` for `den > 0`, ties to even.
pub fn round_div(num: i128, den: i128) -> i128 {
    assert!(den > 0, "round_div needs a positive denominator");
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q & 1 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_ties_to_even() {
        assert_eq!(round_shift(3, 1), 2); // 1.5 -> 2
        assert_eq!(round_shift(5, 1), 2); // 2.5 -> 2
        assert_eq!(round_shift(-3, 1), -2);
        assert_eq!(round_shift(-5, 1), -2);
        assert_eq!(round_shift(7, 2), 2); // 1.75
        assert_eq!(round_div(7, 2), 4);
        assert_eq!(round_div(5, 2), 2);
        assert_eq!(round_div(-5, 2), -2);
        assert_eq!(round_div(-7, 3), -2);
        assert_eq!(round_div(10, 4), 2);
    }

    #[test]
    fn saturates_instead_of_wrapping() {
        let g = Grid::new(4, 2).unwrap();
        let mut sat = Saturation::default();
        let big = FixedScalar::from_raw(g.max_raw());
        let s = g.add(big, big, &mut sat);
        assert_eq!(s.raw(), g.max_raw());
        assert!(sat.raised());
        let mut sat = Saturation::default();
        let n = g.sub(FixedScalar::from_raw(-g.max_raw()), big, &mut sat);
        assert_eq!(n.raw(), -g.max_raw());
        assert_eq!(sat.count(), 1);
    }

    #[test]
    fn mul_and_dot_round_once() {
        let g = Grid::new(8, 64).unwrap();
        let mut sat = Saturation::default();
        let a = g.from_f64(1.5, &mut sat);
        let b = g.from_f64(-2.25, &mut sat);
        assert_eq!(g.to_f64(g.mul(a, b, &mut sat)), -3.375);
        let xs = [a, b, a];
        let ys = [b, a, a];
        assert_eq!(g.to_f64(g.dot(&xs, &ys, &mut sat)), -3.375 * 2.0 + 2.25);
        assert!(!sat.raised());
    }

    #[test]
    fn coordinate_bits_counts_sign_and_endpoint() {
        let g = Grid::new(16, 64).unwrap();
        // 2·64·2^16 + 1 values need 24 bits.
        assert_eq!(g.coordinate_bits(), 24);
        let g = Grid::new(0, 1).unwrap();
        assert_eq!(g.values_per_coordinate(), 3);
        assert_eq!(g.coordinate_bits(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(Grid::new(MAX_SCALE + 1, 4).is_err());
        assert!(Grid::new(4, 0).is_err());
    }
}
